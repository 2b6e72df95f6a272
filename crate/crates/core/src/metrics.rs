//! Accuracy, consensus, reward, Lyapunov and communication measurements.

use std::collections::VecDeque;
use std::io::{Read, Write};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_dim, dist_sq, dot, mean_vector};
use crate::method::DecentralizedMethod;
use crate::objective::Objective;

/// Below this squared distance an initial iterate counts as the optimum.
const DEGENERATE_INIT_EPS_SQ: f64 = 1e-24;

/// One row of a convergence curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub k: u64,
    pub comm_scalars: u64,
    pub accuracy: Option<f64>,
    pub consensus_error: f64,
    pub avg_reward: Option<f64>,
    pub lyapunov: Option<f64>,
    pub wall_time_s: Option<f64>,
}

pub const CSV_HEADER: [&str; 7] = [
    "k",
    "comm_scalars",
    "accuracy",
    "consensus_error",
    "avg_reward",
    "lyapunov",
    "wall_time_s",
];

/// `(1/N) Σ ‖θ_iᵏ − θ*‖² / ‖θ_i⁰ − θ*‖²`
pub fn accuracy<T: AsRef<[f64]>, U: AsRef<[f64]>>(
    thetas: &[T],
    initial: &[U],
    theta_star: &[f64],
) -> Result<f64> {
    check_dim(thetas.len(), initial.len())?;
    if thetas.is_empty() {
        return Err(Error::InvalidSize { n: 0 });
    }
    let mut acc = 0.0;
    for (agent, (t, t0)) in thetas.iter().zip(initial).enumerate() {
        let (t, t0) = (t.as_ref(), t0.as_ref());
        check_dim(theta_star.len(), t.len())?;
        check_dim(theta_star.len(), t0.len())?;
        let base = dist_sq(t0, theta_star);
        if base < DEGENERATE_INIT_EPS_SQ {
            return Err(Error::DegenerateInit { agent });
        }
        acc += dist_sq(t, theta_star) / base;
    }
    Ok(acc / thetas.len() as f64)
}

/// `(1/N) Σ ‖θ_i − θ̄‖²`
pub fn consensus_error<T: AsRef<[f64]>>(thetas: &[T]) -> f64 {
    if thetas.is_empty() {
        return 0.0;
    }
    let mean = mean_vector(thetas);
    thetas
        .iter()
        .map(|t| dist_sq(t.as_ref(), &mean))
        .sum::<f64>()
        / thetas.len() as f64
}

/// Augmented Lagrangian `Σ_i f_i(θ_i) + ⟨λ_i, z − θ_i⟩ + (ρ/2)‖z − θ_i‖²`.
///
/// Needs exact losses, so it is unavailable for policy-gradient objectives.
pub fn lyapunov_value<T: AsRef<[f64]>, U: AsRef<[f64]>>(
    thetas: &[T],
    lambdas: &[U],
    z: &[f64],
    rho: f64,
    objectives: &[Arc<dyn Objective>],
) -> Result<f64> {
    check_dim(thetas.len(), lambdas.len())?;
    check_dim(thetas.len(), objectives.len())?;
    let mut total = 0.0;
    for ((t, l), obj) in thetas.iter().zip(lambdas).zip(objectives) {
        let (t, l) = (t.as_ref(), l.as_ref());
        check_dim(z.len(), t.len())?;
        check_dim(z.len(), l.len())?;
        let f = obj.loss(t).ok_or(Error::NotAvailable("exact loss"))?;
        let resid: Vec<f64> = z.iter().zip(t).map(|(a, b)| a - b).collect();
        total += f + dot(l, &resid) + 0.5 * rho * dot(&resid, &resid);
    }
    Ok(total)
}

/// Mean over agents of their latest episode returns; agents without a
/// return yet are skipped.
pub fn global_mean_return(returns: &[Option<f64>]) -> Option<f64> {
    let vals: Vec<f64> = returns.iter().flatten().copied().collect();
    if vals.is_empty() {
        None
    } else {
        Some(vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// Trailing moving average over a fixed window.
#[derive(Debug, Clone)]
pub struct MovingAverage {
    window: usize,
    buf: VecDeque<f64>,
}

impl MovingAverage {
    pub fn new(window: usize) -> Self {
        MovingAverage {
            window: window.max(1),
            buf: VecDeque::new(),
        }
    }

    pub fn push(&mut self, x: f64) -> f64 {
        self.buf.push_back(x);
        if self.buf.len() > self.window {
            self.buf.pop_front();
        }
        self.value().unwrap_or(x)
    }

    pub fn value(&self) -> Option<f64> {
        if self.buf.is_empty() {
            None
        } else {
            Some(self.buf.iter().sum::<f64>() / self.buf.len() as f64)
        }
    }
}

/// Globally averaged reward: mean over agents at each iteration, then a
/// trailing moving average over `window` iterations.
pub fn avg_reward(per_iteration_agent_returns: &[Vec<f64>], window: usize) -> Vec<f64> {
    let mut ma = MovingAverage::new(window);
    per_iteration_agent_returns
        .iter()
        .map(|r| {
            let m = r.iter().sum::<f64>() / r.len().max(1) as f64;
            ma.push(m)
        })
        .collect()
}

/// Turns optimizer state into [`MetricsRecord`]s.
pub struct Recorder {
    theta_star: Option<Vec<f64>>,
    initial: Vec<Vec<f64>>,
    objectives: Vec<Arc<dyn Objective>>,
    lyapunov: bool,
    reward: MovingAverage,
    wall_time: bool,
    started: Instant,
}

impl Recorder {
    /// Recorder for regression runs: accuracy against `theta_star` and, when
    /// `lyapunov` is set, the augmented Lagrangian.
    pub fn regression(
        theta_star: Vec<f64>,
        initial: Vec<Vec<f64>>,
        objectives: Vec<Arc<dyn Objective>>,
        lyapunov: bool,
    ) -> Self {
        Recorder {
            theta_star: Some(theta_star),
            initial,
            objectives,
            lyapunov,
            reward: MovingAverage::new(1),
            wall_time: false,
            started: Instant::now(),
        }
    }

    /// Recorder for reinforcement-learning runs.
    pub fn reinforcement(reward_window: usize) -> Self {
        Recorder {
            theta_star: None,
            initial: Vec::new(),
            objectives: Vec::new(),
            lyapunov: false,
            reward: MovingAverage::new(reward_window),
            wall_time: false,
            started: Instant::now(),
        }
    }

    /// Also fill `wall_time_s`. Off by default so that outputs are a pure
    /// function of the configuration.
    pub fn with_wall_time(mut self, on: bool) -> Self {
        self.wall_time = on;
        self
    }

    /// Feeds the reward average; call after every iteration.
    pub fn observe(&mut self, method: &dyn DecentralizedMethod) {
        if let Some(r) = global_mean_return(method.latest_returns()) {
            self.reward.push(r);
        }
    }

    pub fn record(&self, method: &dyn DecentralizedMethod) -> Result<MetricsRecord> {
        let thetas = method.thetas();
        let accuracy = match &self.theta_star {
            Some(star) => Some(accuracy(&thetas, &self.initial, star)?),
            None => None,
        };
        let lyapunov = match (self.lyapunov, method.lagrangian()) {
            (true, Some(view)) => Some(lyapunov_value(
                &thetas,
                &view.lambdas,
                view.z,
                view.rho,
                &self.objectives,
            )?),
            _ => None,
        };
        Ok(MetricsRecord {
            k: method.iteration(),
            comm_scalars: method.comm_scalars(),
            accuracy,
            consensus_error: consensus_error(&thetas),
            avg_reward: self.reward.value(),
            lyapunov,
            wall_time_s: self.wall_time.then(|| self.started.elapsed().as_secs_f64()),
        })
    }
}

/// Runs `iterations` steps, recording after every `stride`-th iteration and
/// after the final one.
pub fn run_method(
    method: &mut dyn DecentralizedMethod,
    iterations: u64,
    stride: u64,
    recorder: &mut Recorder,
) -> Result<Vec<MetricsRecord>> {
    let stride = stride.max(1);
    let mut out = Vec::new();
    for i in 1..=iterations {
        method.step()?;
        recorder.observe(method);
        if i % stride == 0 || i == iterations {
            out.push(recorder.record(method)?);
        }
    }
    Ok(out)
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(records: &[MetricsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.k.to_string(),
            r.comm_scalars.to_string(),
            cell(r.accuracy),
            r.consensus_error.to_string(),
            cell(r.avg_reward),
            cell(r.lyapunov),
            cell(r.wall_time_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics_csv<R: Read>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_HEADER {
        return Err(Error::Incompatible(format!(
            "unexpected metrics header {header:?}"
        )));
    }
    let opt = |s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse()
                .map(Some)
                .map_err(|_| Error::Parse(format!("bad number `{s}`")))
        }
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let int = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| Error::Parse(format!("bad integer `{s}`")))
        };
        out.push(MetricsRecord {
            k: int(&rec[0])?,
            comm_scalars: int(&rec[1])?,
            accuracy: opt(&rec[2])?,
            consensus_error: opt(&rec[3])?.unwrap_or(0.0),
            avg_reward: opt(&rec[4])?,
            lyapunov: opt(&rec[5])?,
            wall_time_s: opt(&rec[6])?,
        });
    }
    Ok(out)
}
