//! Experiment orchestration: builds every seed's network, problem and
//! optimizer, runs them, and writes CSV, SVG and run metadata.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::admm::AdmmEngine;
use crate::baselines::{Dgd, Extra, GradientSource, Igd};
use crate::config::{Algorithm, ExperimentConfig, ExperimentKind, GradientMode};
use crate::error::{Error, Result};
use crate::graph::{generate_network_clamped, NetworkGraph};
use crate::method::DecentralizedMethod;
use crate::metrics::{run_method, write_metrics_csv, MetricsRecord, Recorder};
use crate::objective::Objective;
use crate::problems::{
    centralized_solve, synthesize_logistic, synthesize_ridge, RegressionKind, RegressionObjective,
};
use crate::rl::localization::{make_localization_env, LocalizationEnv};
use crate::rl::resource::{
    make_resource_env, mean_profit, run_policy, write_policy_trace_csv, ResourceEnv, TestPolicy,
    TraceRow,
};
use crate::rl::{sample_trajectory, write_trajectory_csv, PolicyGradientObjective};
use crate::rng::{self, Purpose};
use crate::svg::{LinePlot, Point, Series};

/// `git describe`-style identifier of the build.
pub const BUILD_ID: &str = env!("DECADMM_BUILD");

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "DECADMM_OUT";

pub fn default_out_root() -> PathBuf {
    std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

/// Per-seed objectives plus what is needed to score or test them.
pub struct Problem {
    pub objectives: Vec<Arc<dyn Objective>>,
    pub theta_star: Option<Vec<f64>>,
    pub batch_size: usize,
    pub localization: Option<Vec<LocalizationEnv>>,
    pub resource: Option<ResourceEnv>,
}

pub fn build_graph(cfg: &ExperimentConfig, seed: u64) -> Result<NetworkGraph> {
    generate_network_clamped(cfg.n_agents, cfg.omega, seed)
}

pub fn build_problem(cfg: &ExperimentConfig, seed: u64) -> Result<Problem> {
    let n = cfg.n_agents;
    match cfg.kind {
        ExperimentKind::Ridge | ExperimentKind::Logistic => {
            let r = cfg
                .regression
                .as_ref()
                .ok_or_else(|| Error::config("regression", "section is required"))?;
            let (kind, datasets) = if cfg.kind == ExperimentKind::Ridge {
                (
                    RegressionKind::Ridge,
                    synthesize_ridge(n, r.samples_per_agent, r.dim, r.noise_sigma, seed)?.0,
                )
            } else {
                (
                    RegressionKind::Logistic,
                    synthesize_logistic(n, r.samples_per_agent, r.dim, seed)?.0,
                )
            };
            let objectives = datasets
                .into_iter()
                .map(|d| RegressionObjective::new(kind, Arc::new(d), r.l2))
                .collect::<Result<Vec<_>>>()?;
            let theta_star = centralized_solve(&objectives)?.theta;
            Ok(Problem {
                objectives: objectives
                    .into_iter()
                    .map(|o| Arc::new(o) as Arc<dyn Objective>)
                    .collect(),
                theta_star: Some(theta_star),
                batch_size: cfg.batch_size_for(Some(r.samples_per_agent)),
                localization: None,
                resource: None,
            })
        }
        ExperimentKind::Localization => {
            let spec = cfg
                .localization
                .as_ref()
                .ok_or_else(|| Error::config("localization", "section is required"))?;
            let envs = make_localization_env(spec, n)?;
            Ok(Problem {
                objectives: envs
                    .iter()
                    .enumerate()
                    .map(|(i, e)| {
                        Arc::new(PolicyGradientObjective::new(e.clone(), i)) as Arc<dyn Objective>
                    })
                    .collect(),
                theta_star: None,
                batch_size: cfg.batch_size_for(None),
                localization: Some(envs),
                resource: None,
            })
        }
        ExperimentKind::Resource => {
            let r = cfg
                .resource
                .as_ref()
                .ok_or_else(|| Error::config("resource", "section is required"))?;
            let env = make_resource_env(
                r.capacity,
                r.arrival_rate,
                r.workload_mean,
                r.prices,
                r.horizon,
                r.discount,
            )?;
            Ok(Problem {
                objectives: (0..n)
                    .map(|i| {
                        Arc::new(PolicyGradientObjective::new(env.clone(), i)) as Arc<dyn Objective>
                    })
                    .collect(),
                theta_star: None,
                batch_size: cfg.batch_size_for(None),
                localization: None,
                resource: Some(env),
            })
        }
    }
}

pub fn build_method(
    cfg: &ExperimentConfig,
    alg: Algorithm,
    graph: &Arc<NetworkGraph>,
    problem: &Problem,
    seed: u64,
) -> Result<Box<dyn DecentralizedMethod>> {
    let objs = problem.objectives.clone();
    let batch = problem.batch_size;
    if let Some(variant) = alg.variant() {
        let hp = cfg.hyper_params(alg, batch)?;
        return Ok(Box::new(AdmmEngine::new(
            graph.clone(),
            objs,
            hp,
            variant,
            seed,
        )?));
    }
    let step = cfg.step_size(alg)?;
    let gossip_source = match cfg.gossip_gradient {
        GradientMode::Full => GradientSource::Full,
        GradientMode::MiniBatch => GradientSource::MiniBatch(batch),
    };
    Ok(match alg {
        Algorithm::Igd => Box::new(Igd::new(
            graph,
            objs,
            step,
            GradientSource::MiniBatch(batch),
            seed,
        )?),
        Algorithm::Dgd => Box::new(Dgd::new(graph, objs, step, gossip_source, seed)?),
        Algorithm::Extra => Box::new(Extra::new(graph, objs, step, gossip_source, seed)?),
        _ => unreachable!("ADMM variants handled above"),
    })
}

/// Profit of a trained policy against the uniform-random policy.
#[derive(Debug, Clone)]
pub struct PolicyTest {
    pub learned: f64,
    pub uniform: f64,
    pub trace: Vec<TraceRow>,
}

/// Tests the soft-max policy `theta` for `intervals` consecutive intervals.
pub fn resource_policy_test(
    env: &ResourceEnv,
    theta: &[f64],
    intervals: usize,
    seed: u64,
) -> PolicyTest {
    let trace = run_policy(
        env,
        TestPolicy::Softmax(theta),
        intervals,
        &mut rng::stream(seed, Purpose::Evaluation, 0),
    );
    let uniform = run_policy(
        env,
        TestPolicy::Uniform,
        intervals,
        &mut rng::stream(seed, Purpose::Evaluation, 1),
    );
    PolicyTest {
        learned: mean_profit(&trace),
        uniform: mean_profit(&uniform),
        trace,
    }
}

pub struct SeedRun {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub records: Vec<MetricsRecord>,
    pub consensus_parameter: Vec<f64>,
    pub policy_test: Option<PolicyTest>,
    graph: Arc<NetworkGraph>,
    localization: Option<LocalizationEnv>,
}

impl SeedRun {
    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }
}

/// Runs one algorithm on one seed.
pub fn run_seed(cfg: &ExperimentConfig, alg: Algorithm, seed: u64) -> Result<SeedRun> {
    let graph = Arc::new(build_graph(cfg, seed)?);
    let problem = build_problem(cfg, seed)?;
    let mut method = build_method(cfg, alg, &graph, &problem, seed)?;
    let mut recorder = match &problem.theta_star {
        Some(star) => Recorder::regression(
            star.clone(),
            vec![vec![0.0; star.len()]; cfg.n_agents],
            problem.objectives.clone(),
            cfg.lyapunov,
        ),
        None => Recorder::reinforcement(cfg.reward_window),
    };
    let records = run_method(
        method.as_mut(),
        cfg.iterations_for(alg),
        cfg.stride,
        &mut recorder,
    )?;
    let consensus_parameter = method.consensus_parameter();
    let policy_test = match (&problem.resource, &cfg.resource) {
        (Some(env), Some(section)) => Some(resource_policy_test(
            env,
            &consensus_parameter,
            section.eval_intervals,
            seed,
        )),
        _ => None,
    };
    Ok(SeedRun {
        algorithm: alg,
        seed,
        records,
        consensus_parameter,
        policy_test,
        graph,
        localization: problem
            .localization
            .and_then(|envs| envs.into_iter().next()),
    })
}

/// One row of `aggregate.csv`: a metric's median, minimum and maximum over
/// seeds at one recording point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub algorithm: String,
    pub metric: String,
    pub k: u64,
    pub comm_scalars: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

type MetricFn = fn(&MetricsRecord) -> Option<f64>;

const METRICS: [(&str, MetricFn); 4] = [
    ("accuracy", |r| r.accuracy),
    ("consensus_error", |r| Some(r.consensus_error)),
    ("avg_reward", |r| r.avg_reward),
    ("lyapunov", |r| r.lyapunov),
];

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Aggregates the curves of one algorithm over seeds, point by point.
pub fn aggregate(algorithm: &str, runs: &[&[MetricsRecord]]) -> Vec<AggregateRow> {
    let len = runs.iter().map(|r| r.len()).min().unwrap_or(0);
    let mut rows = Vec::new();
    for (name, get) in METRICS {
        for i in 0..len {
            let mut vals: Vec<f64> = runs.iter().filter_map(|r| get(&r[i])).collect();
            if vals.is_empty() {
                continue;
            }
            let mut comm: Vec<f64> = runs.iter().map(|r| r[i].comm_scalars as f64).collect();
            let med = median(&mut vals);
            rows.push(AggregateRow {
                algorithm: algorithm.to_string(),
                metric: name.to_string(),
                k: runs[0][i].k,
                comm_scalars: median(&mut comm),
                median: med,
                min: vals[0],
                max: vals[vals.len() - 1],
            });
        }
    }
    rows
}

pub fn write_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record([
            "algorithm",
            "metric",
            "k",
            "comm_scalars",
            "median",
            "min",
            "max",
        ])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregateRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header
        != [
            "algorithm",
            "metric",
            "k",
            "comm_scalars",
            "median",
            "min",
            "max",
        ]
    {
        return Err(Error::Incompatible(format!(
            "{}: unexpected aggregate header {header:?}",
            path.display()
        )));
    }
    Ok(r.deserialize()
        .collect::<std::result::Result<Vec<AggregateRow>, _>>()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum XAxis {
    Iteration,
    Communication,
}

struct PlotSpec {
    file: &'static str,
    metric: &'static str,
    x: XAxis,
    log_x: bool,
    log_y: bool,
}

fn plot_specs(kind: ExperimentKind) -> Vec<PlotSpec> {
    let spec = |file, metric, x, log_x, log_y| PlotSpec {
        file,
        metric,
        x,
        log_x,
        log_y,
    };
    if kind.is_regression() {
        vec![
            spec(
                "accuracy_vs_comm.svg",
                "accuracy",
                XAxis::Communication,
                true,
                true,
            ),
            spec(
                "accuracy_vs_iteration.svg",
                "accuracy",
                XAxis::Iteration,
                false,
                true,
            ),
        ]
    } else {
        vec![
            spec(
                "reward_vs_iteration.svg",
                "avg_reward",
                XAxis::Iteration,
                false,
                false,
            ),
            spec(
                "reward_vs_comm.svg",
                "avg_reward",
                XAxis::Communication,
                true,
                false,
            ),
            spec(
                "consensus_vs_iteration.svg",
                "consensus_error",
                XAxis::Iteration,
                false,
                true,
            ),
        ]
    }
}

fn build_plot(
    kind: ExperimentKind,
    spec: &PlotSpec,
    sets: &[(String, Vec<AggregateRow>)],
) -> LinePlot {
    let mut series: Vec<Series> = Vec::new();
    for (prefix, rows) in sets {
        for row in rows.iter().filter(|r| r.metric == spec.metric) {
            let label = if prefix.is_empty() {
                row.algorithm.clone()
            } else {
                format!("{prefix}:{}", row.algorithm)
            };
            let x = match spec.x {
                XAxis::Iteration => row.k as f64,
                XAxis::Communication => row.comm_scalars,
            };
            let point = Point {
                x,
                y: row.median,
                band: Some((row.min, row.max)),
            };
            match series.iter_mut().find(|s| s.label == label) {
                Some(s) => s.points.push(point),
                None => series.push(Series {
                    label,
                    points: vec![point],
                }),
            }
        }
    }
    LinePlot {
        title: format!("{}: {}", kind.label(), spec.metric.replace('_', " ")),
        x_label: match spec.x {
            XAxis::Iteration => "iteration".into(),
            XAxis::Communication => "transmitted scalars".into(),
        },
        y_label: format!("{} (median, min/max band)", spec.metric.replace('_', " ")),
        log_x: spec.log_x,
        log_y: spec.log_y,
        series,
    }
}

/// Metadata written next to every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunInfo {
    pub build: String,
    pub kind: ExperimentKind,
    pub requested_omega: f64,
    pub effective_omega: f64,
    pub edges: usize,
    pub parameter_dim: usize,
    pub batch_size: usize,
}

pub struct RunSummary {
    pub dir: PathBuf,
    pub info: RunInfo,
    pub runs: Vec<SeedRun>,
}

fn write_with<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(BufWriter<File>) -> Result<()>,
{
    f(BufWriter::new(File::create(path)?))
}

/// Runs every (algorithm, seed) pair of `cfg` and writes results to `dir`.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path) -> Result<RunSummary> {
    cfg.validate()?;
    fs::create_dir_all(dir)?;
    let jobs: Vec<(Algorithm, u64)> = cfg
        .algorithms
        .iter()
        .flat_map(|&a| cfg.seeds.iter().map(move |&s| (a, s)))
        .collect();
    let runs: Vec<SeedRun> = jobs
        .par_iter()
        .map(|&(alg, seed)| run_seed(cfg, alg, seed))
        .collect::<Result<_>>()?;

    let first_seed = cfg.seeds[0];
    let probe = build_problem(cfg, first_seed)?;
    let graph = &runs[0].graph;
    let info = RunInfo {
        build: BUILD_ID.to_string(),
        kind: cfg.kind,
        requested_omega: cfg.omega,
        effective_omega: graph.effective_omega(),
        edges: graph.edge_count(),
        parameter_dim: probe.objectives[0].dim(),
        batch_size: probe.batch_size,
    };
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    fs::write(
        dir.join("run_info.toml"),
        toml::to_string(&info).expect("run info serializes"),
    )?;

    for run in runs.iter().filter(|r| r.algorithm == cfg.algorithms[0]) {
        fs::write(
            dir.join(format!("graph_seed{}.txt", run.seed)),
            run.graph.to_text(),
        )?;
    }

    let mut rows = Vec::new();
    let mut policy_rows = Vec::new();
    for &alg in &cfg.algorithms {
        let mine: Vec<&SeedRun> = runs.iter().filter(|r| r.algorithm == alg).collect();
        for run in &mine {
            write_with(
                &dir.join(format!("{}_seed{}.csv", alg.label(), run.seed)),
                |w| write_metrics_csv(&run.records, w),
            )?;
            if let Some(test) = &run.policy_test {
                write_with(
                    &dir.join(format!("policy_trace_{}_seed{}.csv", alg.label(), run.seed)),
                    |w| write_policy_trace_csv(&test.trace, w),
                )?;
                policy_rows.push((alg.label(), run.seed, test.learned, test.uniform));
            }
            if let Some(env) = &run.localization {
                let mut rng = rng::stream(run.seed, Purpose::Evaluation, 0);
                let traj =
                    sample_trajectory(env, &run.consensus_parameter, env.horizon, 0, &mut rng)?;
                write_with(
                    &dir.join(format!("trajectory_{}_seed{}.csv", alg.label(), run.seed)),
                    |w| write_trajectory_csv(env, &traj, w),
                )?;
            }
        }
        let curves: Vec<&[MetricsRecord]> = mine.iter().map(|r| r.records.as_slice()).collect();
        rows.extend(aggregate(alg.label(), &curves));
    }
    write_aggregate_csv(&rows, &dir.join("aggregate.csv"))?;
    if !policy_rows.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("policy_test.csv"))?;
        w.write_record(["algorithm", "seed", "learned_profit", "uniform_profit"])?;
        for (alg, seed, learned, uniform) in policy_rows {
            w.write_record([
                alg.to_string(),
                seed.to_string(),
                learned.to_string(),
                uniform.to_string(),
            ])?;
        }
        w.flush()?;
    }
    let sets = vec![(String::new(), rows)];
    for spec in plot_specs(cfg.kind) {
        fs::write(
            dir.join(spec.file),
            build_plot(cfg.kind, &spec, &sets).to_svg(),
        )?;
    }
    Ok(RunSummary {
        dir: dir.to_path_buf(),
        info,
        runs,
    })
}

/// Overlays the median curves of several result directories in one SVG,
/// using the first plot of their experiment kind. Returns the SVG text.
pub fn compare(dirs: &[PathBuf]) -> Result<String> {
    if dirs.is_empty() {
        return Err(Error::Incompatible("no result directories given".into()));
    }
    let mut kind: Option<(ExperimentKind, &Path)> = None;
    let mut sets = Vec::new();
    for dir in dirs {
        let cfg = ExperimentConfig::from_file(&dir.join("config.toml"))?;
        match kind {
            Some((k, first)) if k != cfg.kind => {
                return Err(Error::Incompatible(format!(
                    "{} holds {} results but {} holds {} results",
                    first.display(),
                    k.label(),
                    dir.display(),
                    cfg.kind.label()
                )))
            }
            Some(_) => {}
            None => kind = Some((cfg.kind, dir)),
        }
        let prefix = if dirs.len() == 1 {
            String::new()
        } else {
            dir.file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_else(|| dir.display().to_string())
        };
        sets.push((prefix, read_aggregate_csv(&dir.join("aggregate.csv"))?));
    }
    let (kind, _) = kind.expect("at least one directory");
    let spec = &plot_specs(kind)[0];
    Ok(build_plot(kind, spec, &sets).to_svg())
}

/// File name of the plot that [`compare`] reproduces.
pub fn primary_plot_file(kind: ExperimentKind) -> &'static str {
    plot_specs(kind)[0].file
}
