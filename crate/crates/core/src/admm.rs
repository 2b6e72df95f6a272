//! Token-passing incremental ADMM.
//!
//! One agent is active per iteration, in Hamiltonian-cycle order. The active
//! agent receives the token `(z, μ)`, draws a mini-batch gradient `G`, picks
//! the EMA weight `η` from the adaptive rule, refreshes `μ ← ημ + (1−η)G`,
//! takes a proximal linearized primal step, a dual ascent step, updates `z`
//! incrementally and forwards the token to its cycle successor.
//!
//! With all states initialized to zero, the incremental `z` update keeps
//! `z = (1/N) Σ_i (θ_i − λ_i/ρ)` exactly.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::NetworkGraph;
use crate::linalg::{check_dim, dist_sq};
use crate::method::{DecentralizedMethod, LagrangianView};
use crate::metrics::{lyapunov_value, run_method, MetricsRecord, Recorder};
use crate::objective::Objective;
use crate::rng::{self, Purpose};

/// Relative slack allowed when re-checking `η²‖μ−G‖² ≤ ι²/M` in floating point.
const ETA_BOUND_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Penalty `ρ > 0`.
    pub rho: f64,
    /// Proximal weight `τ ≥ 0`.
    pub tau: f64,
    /// Dual step scale `γ > 0`.
    pub gamma: f64,
    /// EMA cap `η̄ ∈ [0, 1)`.
    pub eta_bar: f64,
    /// Variance-control constant `ι² > 0`.
    pub iota_sq: f64,
    /// Mini-batch size `M ≥ 1`.
    pub batch_size: usize,
}

impl HyperParams {
    pub fn new(
        rho: f64,
        tau: f64,
        gamma: f64,
        eta_bar: f64,
        iota_sq: f64,
        batch_size: usize,
    ) -> Result<Self> {
        let hp = HyperParams {
            rho,
            tau,
            gamma,
            eta_bar,
            iota_sq,
            batch_size,
        };
        hp.validate()?;
        Ok(hp)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| {
            Err(Error::InvalidHyperParam {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho", "must be positive and finite");
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return bad("tau", "must be non-negative and finite");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad("gamma", "must be positive and finite");
        }
        if !(0.0..1.0).contains(&self.eta_bar) {
            return bad("eta_bar", "must lie in [0, 1)");
        }
        if !(self.iota_sq > 0.0 && self.iota_sq.is_finite()) {
            return bad("iota_sq", "must be positive and finite");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        Ok(())
    }
}

/// Primal and dual variables held by one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub theta: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl AgentState {
    pub fn zeros(m: usize) -> Self {
        AgentState {
            theta: vec![0.0; m],
            lambda: vec![0.0; m],
        }
    }
}

/// The circulating token: consensus iterate `z` and EMA gradient `μ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Token {
    pub z: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Token {
    pub fn zeros(m: usize) -> Self {
        Token {
            z: vec![0.0; m],
            mu: vec![0.0; m],
        }
    }
}

/// Adaptive EMA weight: `η̄` when `η̄²‖μ−g‖² ≤ ι²/M`, otherwise
/// `√(ι²/M) / ‖μ−g‖`.
pub fn adaptive_eta(mu: &[f64], g: &[f64], eta_bar: f64, iota_sq: f64, batch_size: usize) -> f64 {
    let bound = iota_sq / batch_size as f64;
    let dev_sq = dist_sq(mu, g);
    if eta_bar * eta_bar * dev_sq <= bound {
        eta_bar
    } else {
        bound.sqrt() / dev_sq.sqrt()
    }
}

/// `η·μ + (1−η)·g`
pub fn ema_update(mu: &[f64], g: &[f64], eta: f64) -> Result<Vec<f64>> {
    check_dim(mu.len(), g.len())?;
    Ok(mu
        .iter()
        .zip(g)
        .map(|(m, gi)| eta * m + (1.0 - eta) * gi)
        .collect())
}

/// Closed-form minimizer of the linearized proximal Lagrangian
/// `⟨μ, θ−θᵏ⟩ + (ρ/2)‖z − θ + λ/ρ‖² + (τ/2)‖θ − θᵏ‖²`,
/// namely `(ρz + λ + τθᵏ − μ) / (ρ + τ)`.
pub fn primal_update(state: &AgentState, token: &Token, hp: &HyperParams) -> Result<Vec<f64>> {
    let m = state.theta.len();
    check_dim(m, state.lambda.len())?;
    check_dim(m, token.z.len())?;
    check_dim(m, token.mu.len())?;
    let denom = hp.rho + hp.tau;
    Ok((0..m)
        .map(|d| {
            (hp.rho * token.z[d] + state.lambda[d] + hp.tau * state.theta[d] - token.mu[d]) / denom
        })
        .collect())
}

/// `λ + ργ(z − θ_new)`
pub fn dual_update(
    lambda: &[f64],
    z: &[f64],
    theta_new: &[f64],
    hp: &HyperParams,
) -> Result<Vec<f64>> {
    check_dim(lambda.len(), z.len())?;
    check_dim(lambda.len(), theta_new.len())?;
    let c = hp.rho * hp.gamma;
    Ok(lambda
        .iter()
        .zip(z.iter().zip(theta_new))
        .map(|(l, (zi, ti))| l + c * (zi - ti))
        .collect())
}

/// `z + (1/N)[(θ_new − λ_new/ρ) − (θ_old − λ_old/ρ)]`
pub fn token_z_update(
    z: &[f64],
    theta_old: &[f64],
    theta_new: &[f64],
    lambda_old: &[f64],
    lambda_new: &[f64],
    rho: f64,
    n: usize,
) -> Result<Vec<f64>> {
    let m = z.len();
    for v in [theta_old, theta_new, lambda_old, lambda_new] {
        check_dim(m, v.len())?;
    }
    if n == 0 {
        return Err(Error::InvalidSize { n });
    }
    let inv_n = 1.0 / n as f64;
    Ok((0..m)
        .map(|d| {
            let new = theta_new[d] - lambda_new[d] / rho;
            let old = theta_old[d] - lambda_old[d] / rho;
            z[d] + inv_n * (new - old)
        })
        .collect())
}

/// Which member of the incremental ADMM family to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Adaptive EMA gradient, carries `(z, μ)`.
    Adaptive,
    /// Plain mini-batch gradient (`η = 0`), carries `z` only.
    Stochastic,
    /// Exact local gradient (`η = 0`), carries `z` only.
    Full,
}

impl Variant {
    pub fn label(self) -> &'static str {
        match self {
            Variant::Adaptive => "asi-admm",
            Variant::Stochastic => "si-admm",
            Variant::Full => "i-admm",
        }
    }
}

/// What happened during one token visit.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// Iteration index of the visit (before increment).
    pub k: u64,
    pub agent: usize,
    pub eta: f64,
    /// `‖μᵏ − G‖²`
    pub deviation_sq: f64,
    pub theta_prev: Vec<f64>,
    pub theta_new: Vec<f64>,
    pub z_prev: Vec<f64>,
    pub z_new: Vec<f64>,
    pub samples: usize,
}

/// Resumable engine state.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EngineSnapshot {
    pub version: u32,
    pub variant: Variant,
    pub k: u64,
    pub comm_scalars: u64,
    pub agents: Vec<AgentState>,
    pub token: Token,
    pub rngs: Vec<ChaCha8Rng>,
    pub latest_returns: Vec<Option<f64>>,
}

impl EngineSnapshot {
    pub const VERSION: u32 = 1;

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: EngineSnapshot =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if snap.version != Self::VERSION {
            return Err(Error::Parse(format!(
                "unsupported snapshot version {}",
                snap.version
            )));
        }
        Ok(snap)
    }
}

/// Incremental ADMM over a fixed network.
pub struct AdmmEngine {
    graph: Arc<NetworkGraph>,
    objectives: Vec<Arc<dyn Objective>>,
    agents: Vec<AgentState>,
    token: Token,
    hp: HyperParams,
    variant: Variant,
    k: u64,
    comm: u64,
    rngs: Vec<ChaCha8Rng>,
    latest_returns: Vec<Option<f64>>,
    last_step: Option<StepReport>,
}

impl AdmmEngine {
    /// All agent states and the token start at zero. Agent `i` samples from
    /// stream `(seed, Sampling, i)`.
    pub fn new(
        graph: Arc<NetworkGraph>,
        objectives: Vec<Arc<dyn Objective>>,
        hp: HyperParams,
        variant: Variant,
        seed: u64,
    ) -> Result<Self> {
        hp.validate()?;
        let n = graph.agent_count();
        check_dim(n, objectives.len())?;
        let m = objectives[0].dim();
        for o in &objectives {
            check_dim(m, o.dim())?;
        }
        if variant == Variant::Full
            && objectives
                .iter()
                .any(|o| o.full_gradient(&vec![0.0; m]).is_none())
        {
            return Err(Error::NotAvailable("exact local gradient"));
        }
        Ok(AdmmEngine {
            graph,
            objectives,
            agents: vec![AgentState::zeros(m); n],
            token: Token::zeros(m),
            hp,
            variant,
            k: 0,
            comm: 0,
            rngs: (0..n)
                .map(|i| rng::stream(seed, Purpose::Sampling, i as u64))
                .collect(),
            latest_returns: vec![None; n],
            last_step: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.token.z.len()
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn token(&self) -> &Token {
        &self.token
    }

    pub fn objectives(&self) -> &[Arc<dyn Objective>] {
        &self.objectives
    }

    pub fn last_step(&self) -> Option<&StepReport> {
        self.last_step.as_ref()
    }

    /// Scalars sent per token hop.
    pub fn scalars_per_hop(&self) -> u64 {
        let m = self.dim() as u64;
        match self.variant {
            Variant::Adaptive => 2 * m,
            Variant::Stochastic | Variant::Full => m,
        }
    }

    /// Largest absolute deviation of `z` from `(1/N) Σ (θ_i − λ_i/ρ)`.
    pub fn z_identity_residual(&self) -> f64 {
        let n = self.agents.len() as f64;
        (0..self.dim())
            .map(|d| {
                let avg: f64 = self
                    .agents
                    .iter()
                    .map(|a| a.theta[d] - a.lambda[d] / self.hp.rho)
                    .sum::<f64>()
                    / n;
                (self.token.z[d] - avg).abs()
            })
            .fold(0.0, f64::max)
    }

    /// One token visit at cycle position `k mod N`.
    pub fn step_report(&mut self) -> Result<&StepReport> {
        let agent = self.graph.agent_at(self.k);
        let objective = &self.objectives[agent];
        let theta_prev = self.agents[agent].theta.clone();
        let (g, samples, mean_return) = match self.variant {
            Variant::Full => {
                let g = objective
                    .full_gradient(&theta_prev)
                    .ok_or(Error::NotAvailable("exact local gradient"))?;
                (g, objective.dataset_size().unwrap_or(1), None)
            }
            Variant::Adaptive | Variant::Stochastic => {
                let s = objective.stochastic_gradient(
                    &theta_prev,
                    self.hp.batch_size,
                    &mut self.rngs[agent],
                )?;
                (s.gradient, s.samples, s.mean_return)
            }
        };
        check_dim(self.dim(), g.len())?;

        let deviation_sq = dist_sq(&self.token.mu, &g);
        let eta = match self.variant {
            Variant::Adaptive => adaptive_eta(
                &self.token.mu,
                &g,
                self.hp.eta_bar,
                self.hp.iota_sq,
                self.hp.batch_size,
            ),
            Variant::Stochastic | Variant::Full => 0.0,
        };
        let bound = self.hp.iota_sq / self.hp.batch_size as f64;
        let lhs = eta * eta * deviation_sq;
        if lhs > bound * (1.0 + ETA_BOUND_RTOL) {
            return Err(Error::EtaBoundViolated {
                k: self.k,
                lhs,
                bound,
            });
        }

        self.token.mu = ema_update(&self.token.mu, &g, eta)?;
        let state = &self.agents[agent];
        let theta_new = primal_update(state, &self.token, &self.hp)?;
        let lambda_new = dual_update(&state.lambda, &self.token.z, &theta_new, &self.hp)?;
        let z_new = token_z_update(
            &self.token.z,
            &state.theta,
            &theta_new,
            &state.lambda,
            &lambda_new,
            self.hp.rho,
            self.agents.len(),
        )?;
        let z_prev = std::mem::replace(&mut self.token.z, z_new);
        self.agents[agent] = AgentState {
            theta: theta_new,
            lambda: lambda_new,
        };
        if mean_return.is_some() {
            self.latest_returns[agent] = mean_return;
        }
        self.comm += self.scalars_per_hop();
        let report = StepReport {
            k: self.k,
            agent,
            eta,
            deviation_sq,
            theta_prev,
            theta_new: self.agents[agent].theta.clone(),
            z_prev,
            z_new: self.token.z.clone(),
            samples,
        };
        self.k += 1;
        Ok(self.last_step.insert(report))
    }

    pub fn snapshot(&self) -> EngineSnapshot {
        EngineSnapshot {
            version: EngineSnapshot::VERSION,
            variant: self.variant,
            k: self.k,
            comm_scalars: self.comm,
            agents: self.agents.clone(),
            token: self.token.clone(),
            rngs: self.rngs.clone(),
            latest_returns: self.latest_returns.clone(),
        }
    }

    pub fn restore(&mut self, snap: &EngineSnapshot) -> Result<()> {
        if snap.variant != self.variant {
            return Err(Error::Parse("snapshot variant differs from engine".into()));
        }
        check_dim(self.agents.len(), snap.agents.len())?;
        check_dim(self.agents.len(), snap.rngs.len())?;
        check_dim(self.agents.len(), snap.latest_returns.len())?;
        let m = self.dim();
        for a in &snap.agents {
            check_dim(m, a.theta.len())?;
            check_dim(m, a.lambda.len())?;
        }
        check_dim(m, snap.token.z.len())?;
        check_dim(m, snap.token.mu.len())?;
        self.k = snap.k;
        self.comm = snap.comm_scalars;
        self.agents = snap.agents.clone();
        self.token = snap.token.clone();
        self.rngs = snap.rngs.clone();
        self.latest_returns = snap.latest_returns.clone();
        self.last_step = None;
        Ok(())
    }
}

impl DecentralizedMethod for AdmmEngine {
    fn label(&self) -> &'static str {
        self.variant.label()
    }

    fn step(&mut self) -> Result<()> {
        self.step_report().map(|_| ())
    }

    fn iteration(&self) -> u64 {
        self.k
    }

    fn comm_scalars(&self) -> u64 {
        self.comm
    }

    fn agent_count(&self) -> usize {
        self.agents.len()
    }

    fn theta(&self, agent: usize) -> &[f64] {
        &self.agents[agent].theta
    }

    fn consensus_parameter(&self) -> Vec<f64> {
        self.token.z.clone()
    }

    fn latest_returns(&self) -> &[Option<f64>] {
        &self.latest_returns
    }

    fn lagrangian(&self) -> Option<LagrangianView<'_>> {
        Some(LagrangianView {
            lambdas: self.agents.iter().map(|a| a.lambda.as_slice()).collect(),
            z: &self.token.z,
            rho: self.hp.rho,
        })
    }
}

/// Runs `iterations` token visits over regression objectives, recording
/// metrics every `stride` iterations and after the last one.
pub fn run_algorithm1(
    engine: &mut AdmmEngine,
    iterations: u64,
    stride: u64,
    recorder: &mut Recorder,
) -> Result<Vec<MetricsRecord>> {
    run_method(engine, iterations, stride, recorder)
}

/// Same loop as [`run_algorithm1`]; the objectives are policy-gradient
/// estimators and the recorder tracks rewards instead of accuracy.
pub fn run_algorithm2(
    engine: &mut AdmmEngine,
    iterations: u64,
    stride: u64,
    recorder: &mut Recorder,
) -> Result<Vec<MetricsRecord>> {
    run_method(engine, iterations, stride, recorder)
}

/// `‖θ^{k+1} − θ^k‖²` and `‖z^{k+1} − z^k‖²` of a visit.
pub fn step_movement(report: &StepReport) -> (f64, f64) {
    (
        dist_sq(&report.theta_new, &report.theta_prev),
        dist_sq(&report.z_new, &report.z_prev),
    )
}

/// Per-iteration decrease guaranteed for the augmented Lagrangian:
/// `V⁺ ≤ V + noise − χ‖θ⁺ − θ‖² − φ‖z⁺ − z‖²` with
/// `χ = (ρ − L + 2τ + 1)/2 − 2ρ/γ` and `φ = Nρ/2 − 2ρN²/γ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescentBound {
    pub chi: f64,
    pub phi: f64,
    /// Stochastic allowance `(ι² + σ²)/M`; zero for exact gradients.
    pub noise: f64,
}

impl DescentBound {
    pub fn new(hp: &HyperParams, lipschitz: f64, n_agents: usize, noise: f64) -> Self {
        let (rho, n) = (hp.rho, n_agents as f64);
        DescentBound {
            chi: (rho - lipschitz + 2.0 * hp.tau + 1.0) / 2.0 - 2.0 * rho / hp.gamma,
            phi: n * rho / 2.0 - 2.0 * rho * n * n / hp.gamma,
            noise,
        }
    }

    /// Whether one transition satisfies the bound, up to a relative rounding
    /// tolerance. Non-finite values never do.
    pub fn holds(&self, before: f64, after: f64, theta_move_sq: f64, z_move_sq: f64) -> bool {
        let limit = before + self.noise - self.chi * theta_move_sq - self.phi * z_move_sq;
        let tol = 1e-10 * (before.abs() + after.abs()).max(1.0);
        before.is_finite() && after.is_finite() && limit.is_finite() && after <= limit + tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DescentReport {
    pub checked: u64,
    pub satisfied: u64,
    pub first_violation: Option<u64>,
    /// Lagrangian before the first and after every iteration.
    pub values: Vec<f64>,
}

impl DescentReport {
    pub fn fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.satisfied as f64 / self.checked as f64
        }
    }
}

fn engine_lagrangian(engine: &AdmmEngine) -> Result<f64> {
    let thetas: Vec<&[f64]> = engine.agents.iter().map(|a| a.theta.as_slice()).collect();
    let lambdas: Vec<&[f64]> = engine.agents.iter().map(|a| a.lambda.as_slice()).collect();
    lyapunov_value(
        &thetas,
        &lambdas,
        &engine.token.z,
        engine.hp.rho,
        &engine.objectives,
    )
}

/// Runs `iterations` visits and checks every transition against `bound`.
pub fn monitor_descent(
    engine: &mut AdmmEngine,
    iterations: u64,
    bound: &DescentBound,
) -> Result<DescentReport> {
    let mut before = engine_lagrangian(engine)?;
    let mut report = DescentReport {
        checked: 0,
        satisfied: 0,
        first_violation: None,
        values: vec![before],
    };
    for _ in 0..iterations {
        let (k, (dt, dz)) = {
            let step = engine.step_report()?;
            (step.k, step_movement(step))
        };
        let after = engine_lagrangian(engine)?;
        report.checked += 1;
        if bound.holds(before, after, dt, dz) {
            report.satisfied += 1;
        } else if report.first_violation.is_none() {
            report.first_violation = Some(k);
        }
        report.values.push(after);
        before = after;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(rho: f64, tau: f64, gamma: f64) -> HyperParams {
        HyperParams::new(rho, tau, gamma, 0.9, 10.0, 10).unwrap()
    }

    #[test]
    fn eta_branches() {
        let mu = [0.0, 0.0];
        // ‖μ−g‖ = 2: 0.81·4 = 3.24 > 1, so η = 1/2
        let eta = adaptive_eta(&mu, &[2.0, 0.0], 0.9, 10.0, 10);
        assert!((eta - 0.5).abs() < 1e-15);
        // ‖μ−g‖ = 0.5: 0.2025 ≤ 1, so η = η̄
        assert_eq!(adaptive_eta(&mu, &[0.0, 0.5], 0.9, 10.0, 10), 0.9);
        assert_eq!(adaptive_eta(&[1.0, 2.0], &[1.0, 2.0], 0.7, 1.0, 3), 0.7);
    }

    #[test]
    fn ema_cases() {
        let g = [1.5, -2.0];
        assert_eq!(ema_update(&[9.0, 9.0], &g, 0.0).unwrap(), g.to_vec());
        let out = ema_update(&[0.0, 0.0], &g, 0.9).unwrap();
        assert!((out[0] - 0.15).abs() < 1e-15 && (out[1] + 0.2).abs() < 1e-15);
        assert_eq!(ema_update(&g, &g, 0.37).unwrap(), g.to_vec());
        assert!(matches!(
            ema_update(&[0.0], &g, 0.5),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn primal_cases() {
        let state = AgentState {
            theta: vec![0.4, -0.3],
            lambda: vec![0.0, 0.0],
        };
        let token = Token {
            z: vec![1.0, 2.0],
            mu: vec![0.0, 0.0],
        };
        assert_eq!(
            primal_update(&state, &token, &hp(2.0, 0.0, 1.0)).unwrap(),
            token.z
        );

        let zero = AgentState::zeros(2);
        let token = Token {
            z: vec![0.0, 0.0],
            mu: vec![2.0, -2.0],
        };
        assert_eq!(
            primal_update(&zero, &token, &hp(1.0, 1.0, 1.0)).unwrap(),
            vec![-1.0, 1.0]
        );
    }

    #[test]
    fn dual_cases() {
        let h = hp(1.0, 0.0, 1.0);
        assert_eq!(
            dual_update(&[0.0, 0.0], &[1.0, 1.0], &[0.0, 0.0], &h).unwrap(),
            vec![1.0, 1.0]
        );
        assert_eq!(
            dual_update(&[0.3, 0.1], &[0.5, 0.5], &[0.5, 0.5], &h).unwrap(),
            vec![0.3, 0.1]
        );
        let h3 = hp(1.0, 0.0, 3.0);
        let inc1 = dual_update(&[0.0], &[2.0], &[0.5], &h).unwrap()[0];
        let inc3 = dual_update(&[0.0], &[2.0], &[0.5], &h3).unwrap()[0];
        assert_eq!(inc3, 3.0 * inc1);
    }

    #[test]
    fn z_update_cases() {
        let z = [0.2, 0.4];
        let t = [1.0, 1.0];
        let l = [0.5, -0.5];
        assert_eq!(
            token_z_update(&z, &t, &t, &l, &l, 2.0, 4).unwrap(),
            z.to_vec()
        );
        // single agent: z tracks θ − λ/ρ
        let rho = 2.0;
        let z0 = [t[0] - l[0] / rho, t[1] - l[1] / rho];
        let tn = [3.0, -1.0];
        let ln = [1.0, 2.0];
        let z1 = token_z_update(&z0, &t, &tn, &l, &ln, rho, 1).unwrap();
        assert!((z1[0] - (tn[0] - ln[0] / rho)).abs() < 1e-15);
        assert!((z1[1] - (tn[1] - ln[1] / rho)).abs() < 1e-15);
    }

    #[test]
    fn descent_bound_cases() {
        let h = HyperParams::new(1.0, 1.0, 80.0, 0.0, 10.0, 1).unwrap();
        let b = DescentBound::new(&h, 2.0, 20, 0.0);
        assert!((b.chi - (1.0 - 1.0 / 40.0)).abs() < 1e-15);
        assert!(b.phi.abs() < 1e-12);
        assert!(b.holds(5.0, 4.0, 1.0, 0.0));
        assert!(!b.holds(5.0, 4.5, 1.0, 0.0));
        assert!(!b.holds(5.0, f64::NAN, 0.0, 0.0));
        assert!(!b.holds(f64::NEG_INFINITY, f64::NEG_INFINITY, 0.0, 0.0));
    }

    #[test]
    fn hyper_params_validation() {
        assert!(HyperParams::new(0.0, 0.1, 1.0, 0.5, 1.0, 1).is_err());
        assert!(HyperParams::new(1.0, -0.1, 1.0, 0.5, 1.0, 1).is_err());
        assert!(HyperParams::new(1.0, 0.1, 0.0, 0.5, 1.0, 1).is_err());
        assert!(HyperParams::new(1.0, 0.1, 1.0, 1.0, 1.0, 1).is_err());
        assert!(HyperParams::new(1.0, 0.1, 1.0, 0.5, 0.0, 1).is_err());
        assert!(HyperParams::new(1.0, 0.1, 1.0, 0.5, 1.0, 0).is_err());
        assert!(HyperParams::new(1.0, 0.0, 1.0, 0.0, 1.0, 1).is_ok());
    }
}
