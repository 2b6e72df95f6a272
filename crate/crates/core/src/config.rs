//! Experiment configuration: TOML files, named presets, command-line
//! overrides and validation.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::admm::{HyperParams, Variant};
use crate::error::{Error, Result};
use crate::rl::localization::LocalizationSpec;
use crate::rl::resource::Prices;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Ridge,
    Logistic,
    Localization,
    Resource,
}

impl ExperimentKind {
    pub fn is_regression(self) -> bool {
        matches!(self, ExperimentKind::Ridge | ExperimentKind::Logistic)
    }

    pub fn label(self) -> &'static str {
        match self {
            ExperimentKind::Ridge => "ridge",
            ExperimentKind::Logistic => "logistic",
            ExperimentKind::Localization => "localization",
            ExperimentKind::Resource => "resource",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    AsiAdmm,
    SiAdmm,
    IAdmm,
    Dgd,
    Extra,
    Igd,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::AsiAdmm,
        Algorithm::SiAdmm,
        Algorithm::IAdmm,
        Algorithm::Dgd,
        Algorithm::Extra,
        Algorithm::Igd,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::AsiAdmm => "asi-admm",
            Algorithm::SiAdmm => "si-admm",
            Algorithm::IAdmm => "i-admm",
            Algorithm::Dgd => "dgd",
            Algorithm::Extra => "extra",
            Algorithm::Igd => "igd",
        }
    }

    pub fn variant(self) -> Option<Variant> {
        match self {
            Algorithm::AsiAdmm => Some(Variant::Adaptive),
            Algorithm::SiAdmm => Some(Variant::Stochastic),
            Algorithm::IAdmm => Some(Variant::Full),
            _ => None,
        }
    }

    pub fn is_gossip(self) -> bool {
        matches!(self, Algorithm::Dgd | Algorithm::Extra)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label() == s)
            .ok_or_else(|| Error::config("algorithms", format!("unknown algorithm `{s}`")))
    }
}

/// Gradient oracle used by DGD and EXTRA.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    Full,
    MiniBatch,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdmmSection {
    pub rho: Option<f64>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub eta_bar: Option<f64>,
    pub iota_sq: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSizes {
    pub igd: Option<f64>,
    pub dgd: Option<f64>,
    pub extra: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegressionSection {
    pub dim: usize,
    pub samples_per_agent: usize,
    /// Ridge target noise; unused for logistic data.
    pub noise_sigma: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResourceSection {
    pub capacity: usize,
    pub arrival_rate: f64,
    pub workload_mean: f64,
    pub prices: Prices,
    pub horizon: usize,
    pub discount: f64,
    /// Length of the post-training policy test.
    pub eval_intervals: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub preset: Option<String>,
    pub kind: ExperimentKind,
    pub algorithms: Vec<Algorithm>,
    pub n_agents: usize,
    pub omega: f64,
    /// Token visits for incremental methods.
    pub iterations: u64,
    /// Synchronous rounds for DGD and EXTRA; defaults to `iterations`.
    pub gossip_iterations: Option<u64>,
    pub seeds: Vec<u64>,
    pub stride: u64,
    /// Fraction of the local dataset per mini-batch.
    pub batch_ratio: Option<f64>,
    /// Absolute mini-batch size (data points or trajectories).
    pub batch_size: Option<usize>,
    pub gossip_gradient: GradientMode,
    /// Moving-average window of the reported reward.
    pub reward_window: usize,
    /// Record the augmented Lagrangian for ADMM regression runs.
    pub lyapunov: bool,
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub admm: AdmmSection,
    #[serde(default)]
    pub steps: StepSizes,
    pub regression: Option<RegressionSection>,
    pub localization: Option<LocalizationSpec>,
    pub resource: Option<ResourceSection>,
}

pub const PRESET_NAMES: [&str; 8] = [
    "fig3-ridge",
    "fig3-logistic",
    "fig5-localization-5",
    "fig5-localization-10",
    "fig6-hetero-5",
    "fig6-hetero-10",
    "fig7-resource-2",
    "fig7-resource-5",
];

fn regression_preset(kind: ExperimentKind) -> ExperimentConfig {
    let ridge = kind == ExperimentKind::Ridge;
    ExperimentConfig {
        preset: None,
        kind,
        algorithms: Algorithm::ALL.to_vec(),
        n_agents: 20,
        omega: 0.3,
        iterations: 20_000,
        gossip_iterations: Some(2_000),
        seeds: (0..5).collect(),
        stride: 10,
        batch_ratio: Some(0.1),
        batch_size: None,
        gossip_gradient: GradientMode::Full,
        reward_window: 1,
        lyapunov: false,
        out_dir: None,
        admm: AdmmSection {
            rho: Some(if ridge { 3.0 } else { 1.0 }),
            tau: Some(0.2),
            gamma: Some(if ridge { 0.5 } else { 1.0 }),
            eta_bar: Some(0.9),
            iota_sq: Some(10.0),
        },
        steps: StepSizes {
            igd: Some(0.01),
            dgd: Some(0.05),
            extra: Some(0.05),
        },
        regression: Some(RegressionSection {
            dim: if ridge { 10 } else { 2 },
            samples_per_agent: 1000,
            noise_sigma: 0.1,
            l2: 0.0,
        }),
        localization: None,
        resource: None,
    }
}

fn localization_preset(n: usize, heterogeneous: bool) -> ExperimentConfig {
    let step = if heterogeneous && n == 10 {
        (0.01, 0.01)
    } else if heterogeneous {
        (0.095, 0.095)
    } else {
        (0.095, 0.09)
    };
    ExperimentConfig {
        preset: None,
        kind: ExperimentKind::Localization,
        algorithms: vec![Algorithm::AsiAdmm, Algorithm::Igd, Algorithm::Dgd],
        n_agents: n,
        omega: if n == 5 { 0.3 } else { 0.8 },
        iterations: 400,
        gossip_iterations: None,
        seeds: (0..5).collect(),
        stride: 5,
        batch_ratio: None,
        batch_size: Some(20),
        gossip_gradient: GradientMode::MiniBatch,
        reward_window: 10,
        lyapunov: false,
        out_dir: None,
        admm: AdmmSection {
            rho: Some(1.0),
            tau: Some(10.0),
            gamma: Some(1.0),
            eta_bar: Some(0.8),
            iota_sq: Some(10.0),
        },
        steps: StepSizes {
            igd: Some(step.0),
            dgd: Some(step.1),
            extra: None,
        },
        regression: None,
        localization: Some(LocalizationSpec {
            heterogeneous,
            feature_scale: 0.001,
            ..LocalizationSpec::default()
        }),
        resource: None,
    }
}

fn resource_preset(n: usize) -> ExperimentConfig {
    ExperimentConfig {
        preset: None,
        kind: ExperimentKind::Resource,
        algorithms: vec![Algorithm::AsiAdmm, Algorithm::Igd, Algorithm::Dgd],
        n_agents: n,
        omega: 0.3,
        iterations: 1000,
        gossip_iterations: None,
        seeds: (0..5).collect(),
        stride: 10,
        batch_ratio: None,
        batch_size: Some(20),
        gossip_gradient: GradientMode::MiniBatch,
        reward_window: 10,
        lyapunov: false,
        out_dir: None,
        admm: AdmmSection {
            rho: Some(1.0),
            tau: Some(20.0),
            gamma: Some(1.0),
            eta_bar: Some(0.8),
            iota_sq: Some(10.0),
        },
        steps: StepSizes {
            igd: Some(0.0095),
            dgd: Some(0.0095),
            extra: None,
        },
        regression: None,
        localization: None,
        resource: Some(ResourceSection {
            capacity: 6,
            arrival_rate: 3.0,
            workload_mean: 1.0,
            prices: Prices::default(),
            horizon: 30,
            discount: 0.99,
            eval_intervals: 300,
        }),
    }
}

impl ExperimentConfig {
    /// Looks up a named preset.
    pub fn preset(name: &str) -> Result<Self> {
        let mut cfg = match name {
            "fig3-ridge" => regression_preset(ExperimentKind::Ridge),
            "fig3-logistic" => regression_preset(ExperimentKind::Logistic),
            "fig5-localization-5" => localization_preset(5, false),
            "fig5-localization-10" => localization_preset(10, false),
            "fig6-hetero-5" => localization_preset(5, true),
            "fig6-hetero-10" => localization_preset(10, true),
            "fig7-resource-2" => resource_preset(2),
            "fig7-resource-5" => resource_preset(5),
            _ => {
                return Err(Error::config(
                    "preset",
                    format!(
                        "unknown preset `{name}`; known: {}",
                        PRESET_NAMES.join(", ")
                    ),
                ))
            }
        };
        cfg.preset = Some(name.to_string());
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn gossip_rounds(&self) -> u64 {
        self.gossip_iterations.unwrap_or(self.iterations)
    }

    /// Iterations run by `alg`.
    pub fn iterations_for(&self, alg: Algorithm) -> u64 {
        if alg.is_gossip() {
            self.gossip_rounds()
        } else {
            self.iterations
        }
    }

    /// Mini-batch size for a local dataset of `dataset_size` points.
    pub fn batch_size_for(&self, dataset_size: Option<usize>) -> usize {
        match (self.batch_size, self.batch_ratio, dataset_size) {
            (Some(m), _, _) => m,
            (None, Some(r), Some(n)) => ((r * n as f64).round() as usize).max(1),
            _ => 1,
        }
    }

    fn require(value: Option<f64>, field: &str) -> Result<f64> {
        value.ok_or_else(|| Error::config(field, "required by the selected algorithms"))
    }

    /// Hyperparameters of an ADMM variant; the EMA cap is zero for the
    /// non-adaptive variants.
    pub fn hyper_params(&self, alg: Algorithm, batch_size: usize) -> Result<HyperParams> {
        let a = &self.admm;
        let eta_bar = if alg == Algorithm::AsiAdmm {
            Self::require(a.eta_bar, "admm.eta_bar")?
        } else {
            0.0
        };
        HyperParams::new(
            Self::require(a.rho, "admm.rho")?,
            Self::require(a.tau, "admm.tau")?,
            Self::require(a.gamma, "admm.gamma")?,
            eta_bar,
            Self::require(a.iota_sq, "admm.iota_sq")?,
            batch_size,
        )
        .map_err(|e| match e {
            Error::InvalidHyperParam { name, reason } => {
                Error::config(format!("admm.{name}"), reason)
            }
            other => other,
        })
    }

    pub fn step_size(&self, alg: Algorithm) -> Result<f64> {
        let (value, field) = match alg {
            Algorithm::Igd => (self.steps.igd, "steps.igd"),
            Algorithm::Dgd => (self.steps.dgd, "steps.dgd"),
            Algorithm::Extra => (self.steps.extra, "steps.extra"),
            _ => return Err(Error::config("steps", format!("{alg} has no step size"))),
        };
        let step = Self::require(value, field)?;
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::config(field, "must be positive and finite"));
        }
        Ok(step)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_agents < 2 {
            return Err(Error::config("n_agents", "at least 2 agents are required"));
        }
        if !(self.omega > 0.0 && self.omega <= 1.0) {
            return Err(Error::config("omega", "must lie in (0, 1]"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("seeds", "at least one seed is required"));
        }
        if self.stride == 0 {
            return Err(Error::config("stride", "must be at least 1"));
        }
        if self.reward_window == 0 {
            return Err(Error::config("reward_window", "must be at least 1"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::config(
                "algorithms",
                "at least one algorithm is required",
            ));
        }
        let unique: BTreeSet<_> = self.algorithms.iter().collect();
        if unique.len() != self.algorithms.len() {
            return Err(Error::config("algorithms", "duplicate entries"));
        }
        match (self.batch_ratio, self.batch_size) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "batch_ratio",
                    "give either batch_ratio or batch_size, not both",
                ))
            }
            (None, None) => {
                return Err(Error::config(
                    "batch_size",
                    "a batch size or ratio is required",
                ))
            }
            (Some(r), None) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::config("batch_ratio", "must lie in (0, 1]"));
                }
                if !self.kind.is_regression() {
                    return Err(Error::config(
                        "batch_ratio",
                        "only applies to dataset-backed problems",
                    ));
                }
            }
            (None, Some(0)) => return Err(Error::config("batch_size", "must be at least 1")),
            (None, Some(_)) => {}
        }
        for &alg in &self.algorithms {
            if alg.variant().is_some() {
                self.hyper_params(alg, 1)?;
            } else {
                self.step_size(alg)?;
            }
        }
        let exact_needed = self.algorithms.contains(&Algorithm::IAdmm)
            || (self.gossip_gradient == GradientMode::Full
                && self.algorithms.iter().any(|a| a.is_gossip()));
        if exact_needed && !self.kind.is_regression() {
            return Err(Error::config(
                "gossip_gradient",
                "exact gradients exist only for regression problems",
            ));
        }
        match self.kind {
            ExperimentKind::Ridge | ExperimentKind::Logistic => {
                let r = self
                    .regression
                    .as_ref()
                    .ok_or_else(|| Error::config("regression", "section is required"))?;
                if r.dim == 0 {
                    return Err(Error::config("regression.dim", "must be at least 1"));
                }
                if r.samples_per_agent == 0 {
                    return Err(Error::config(
                        "regression.samples_per_agent",
                        "must be at least 1",
                    ));
                }
                if r.noise_sigma.is_nan() || r.noise_sigma < 0.0 {
                    return Err(Error::config(
                        "regression.noise_sigma",
                        "must be non-negative",
                    ));
                }
                if r.l2.is_nan() || r.l2 < 0.0 {
                    return Err(Error::config("regression.l2", "must be non-negative"));
                }
            }
            ExperimentKind::Localization => {
                let spec = self
                    .localization
                    .as_ref()
                    .ok_or_else(|| Error::config("localization", "section is required"))?;
                crate::rl::localization::make_localization_env(spec, self.n_agents)
                    .map_err(|e| Error::config("localization", e.to_string()))?;
            }
            ExperimentKind::Resource => {
                let r = self
                    .resource
                    .as_ref()
                    .ok_or_else(|| Error::config("resource", "section is required"))?;
                crate::rl::resource::make_resource_env(
                    r.capacity,
                    r.arrival_rate,
                    r.workload_mean,
                    r.prices,
                    r.horizon,
                    r.discount,
                )
                .map_err(|e| Error::config("resource", e.to_string()))?;
            }
        }
        Ok(())
    }
}

/// Command-line values that replace configuration fields.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub seed_count: Option<u64>,
    pub iterations: Option<u64>,
    pub gossip_iterations: Option<u64>,
    pub n_agents: Option<usize>,
    pub omega: Option<f64>,
    pub algorithms: Option<Vec<Algorithm>>,
    pub stride: Option<u64>,
    pub batch_size: Option<usize>,
    pub rho: Option<f64>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub eta_bar: Option<f64>,
    pub out_dir: Option<PathBuf>,
    pub rss_state: bool,
}

impl Overrides {
    pub fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(n) = self.seed_count {
            let first = cfg.seeds.first().copied().unwrap_or(0);
            cfg.seeds = (first..first + n).collect();
        }
        if let Some(k) = self.iterations {
            cfg.iterations = k;
            if self.gossip_iterations.is_none() && cfg.gossip_iterations.is_some_and(|g| g > k) {
                cfg.gossip_iterations = Some(k);
            }
        }
        if let Some(k) = self.gossip_iterations {
            cfg.gossip_iterations = Some(k);
        }
        if let Some(n) = self.n_agents {
            cfg.n_agents = n;
        }
        if let Some(w) = self.omega {
            cfg.omega = w;
        }
        if let Some(a) = &self.algorithms {
            cfg.algorithms = a.clone();
        }
        if let Some(s) = self.stride {
            cfg.stride = s;
        }
        if let Some(m) = self.batch_size {
            cfg.batch_size = Some(m);
            cfg.batch_ratio = None;
        }
        if let Some(v) = self.rho {
            cfg.admm.rho = Some(v);
        }
        if let Some(v) = self.tau {
            cfg.admm.tau = Some(v);
        }
        if let Some(v) = self.gamma {
            cfg.admm.gamma = Some(v);
        }
        if let Some(v) = self.eta_bar {
            cfg.admm.eta_bar = Some(v);
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = Some(d.clone());
        }
        if self.rss_state {
            if let Some(spec) = cfg.localization.as_mut() {
                spec.oracle_state = false;
            }
        }
    }
}

/// Resolves a preset or a file, applies overrides and validates.
pub fn load_config(
    preset: Option<&str>,
    file: Option<&Path>,
    overrides: &Overrides,
) -> Result<ExperimentConfig> {
    let mut cfg = match (preset, file) {
        (Some(name), None) => ExperimentConfig::preset(name)?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)?;
            toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        }
        (Some(_), Some(_)) => {
            return Err(Error::config(
                "preset",
                "give either a preset or a config file, not both",
            ))
        }
        (None, None) => {
            return Err(Error::config(
                "preset",
                "a preset or a config file is required",
            ))
        }
    };
    overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_validates_and_round_trips() {
        for name in PRESET_NAMES {
            let cfg = ExperimentConfig::preset(name).unwrap();
            cfg.validate().unwrap();
            let text = cfg.to_toml();
            assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg, "{name}");
        }
    }

    #[test]
    fn ridge_preset_values() {
        let cfg = ExperimentConfig::preset("fig3-ridge").unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Ridge);
        assert!(cfg.algorithms.contains(&Algorithm::AsiAdmm));
        let hp = cfg.hyper_params(Algorithm::AsiAdmm, 1).unwrap();
        assert_eq!(
            (hp.rho, hp.tau, hp.eta_bar, hp.iota_sq),
            (3.0, 0.2, 0.9, 10.0)
        );
        assert_eq!(cfg.batch_ratio, Some(0.1));
        assert_eq!(cfg.batch_size_for(Some(1000)), 100);
    }

    #[test]
    fn localization_preset_values() {
        let cfg = ExperimentConfig::preset("fig5-localization-5").unwrap();
        assert_eq!(cfg.kind, ExperimentKind::Localization);
        assert_eq!((cfg.n_agents, cfg.omega), (5, 0.3));
        let spec = cfg.localization.as_ref().unwrap();
        assert_eq!((spec.discount, spec.horizon), (0.99, 50));
        let hp = cfg.hyper_params(Algorithm::AsiAdmm, 1).unwrap();
        assert_eq!((hp.rho, hp.tau, hp.eta_bar), (1.0, 10.0, 0.8));
    }

    #[test]
    fn missing_rho_is_named() {
        let mut cfg = ExperimentConfig::preset("fig3-ridge").unwrap();
        cfg.admm.rho = None;
        let msg = cfg.validate().unwrap_err().to_string();
        assert!(msg.contains("rho"), "{msg}");

        let text = ExperimentConfig::preset("fig3-ridge")
            .unwrap()
            .to_toml()
            .replace("rho = 3.0\n", "");
        let msg = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(msg.contains("rho"), "{msg}");
    }

    #[test]
    fn gossip_only_runs_do_not_need_admm() {
        let mut cfg = ExperimentConfig::preset("fig3-ridge").unwrap();
        cfg.algorithms = vec![Algorithm::Dgd];
        cfg.admm = AdmmSection::default();
        cfg.validate().unwrap();
    }

    #[test]
    fn ratio_and_size_are_exclusive() {
        let mut cfg = ExperimentConfig::preset("fig3-ridge").unwrap();
        cfg.batch_size = Some(5);
        assert!(cfg
            .validate()
            .unwrap_err()
            .to_string()
            .contains("batch_ratio"));
    }

    #[test]
    fn overrides_replace_file_values() {
        let o = Overrides {
            seed: Some(7),
            iterations: Some(50),
            rho: Some(2.0),
            ..Default::default()
        };
        let cfg = load_config(Some("fig3-ridge"), None, &o).unwrap();
        assert_eq!(cfg.seeds, vec![7]);
        assert_eq!(cfg.iterations, 50);
        assert_eq!(cfg.gossip_rounds(), 50);
        assert_eq!(cfg.admm.rho, Some(2.0));
    }

    #[test]
    fn unknown_inputs_are_rejected() {
        assert!(ExperimentConfig::preset("fig9").is_err());
        assert!("admm".parse::<Algorithm>().is_err());
        assert_eq!("extra".parse::<Algorithm>().unwrap(), Algorithm::Extra);
        let text = ExperimentConfig::preset("fig3-ridge").unwrap().to_toml() + "\nbogus = 1\n";
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
