//! Regression objectives: synthetic data, losses, gradients and the
//! centralized reference solution.

use std::io::{Read, Write};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_sq};
use crate::objective::{GradientSample, Objective};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressionKind {
    /// Least squares `(1/M) Σ (θᵀo − t)²`.
    Ridge,
    /// Logistic loss `(1/M) Σ log(1 + exp(−t θᵀo))`, labels in {−1, +1}.
    Logistic,
}

/// Samples owned by one agent.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    inputs: Vec<Vec<f64>>,
    targets: Vec<f64>,
    owner: usize,
}

impl RegressionDataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<f64>, owner: usize) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                got: targets.len(),
            });
        }
        let m = inputs[0].len();
        if let Some(bad) = inputs.iter().find(|o| o.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: bad.len(),
            });
        }
        Ok(RegressionDataset {
            inputs,
            targets,
            owner,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs[0].len()
    }

    pub fn owner(&self) -> usize {
        self.owner
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn sample(&self, idx: usize) -> (&[f64], f64) {
        (&self.inputs[idx], self.targets[idx])
    }

    /// True when every target is ±1.
    pub fn has_binary_labels(&self) -> bool {
        self.targets.iter().all(|&t| t == 1.0 || t == -1.0)
    }
}

/// Parameters of the data generator.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub theta_star: Vec<f64>,
    pub noise_sigma: f64,
}

fn standard_normal_vec(rng: &mut impl Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| StandardNormal.sample(rng)).collect()
}

/// Synthesizes `t = θ*ᵀo + e` with `θ*, o ~ N(0, I)` and `e ~ N(0, σ²)`.
pub fn synthesize_ridge(
    n_agents: usize,
    samples_per_agent: usize,
    dim: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Vec<RegressionDataset>, GroundTruth)> {
    check_sizes(n_agents, samples_per_agent, dim)?;
    let mut truth_rng = rng::stream(seed, Purpose::Data, u64::MAX);
    let theta_star = standard_normal_vec(&mut truth_rng, dim);
    let datasets = (0..n_agents)
        .map(|agent| {
            let mut rng = rng::stream(seed, Purpose::Data, agent as u64);
            let mut inputs = Vec::with_capacity(samples_per_agent);
            let mut targets = Vec::with_capacity(samples_per_agent);
            for _ in 0..samples_per_agent {
                let o = standard_normal_vec(&mut rng, dim);
                let e: f64 = StandardNormal.sample(&mut rng);
                targets.push(dot(&theta_star, &o) + noise_sigma * e);
                inputs.push(o);
            }
            RegressionDataset::new(inputs, targets, agent)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        datasets,
        GroundTruth {
            theta_star,
            noise_sigma,
        },
    ))
}

/// Label rule: `+1` when `v ≤ σ(θᵀo)`, otherwise `−1`.
pub fn logistic_label(theta: &[f64], o: &[f64], v: f64) -> f64 {
    if v <= sigmoid(dot(theta, o)) {
        1.0
    } else {
        -1.0
    }
}

/// Synthesizes logistic data with a standard-normal generating parameter.
pub fn synthesize_logistic(
    n_agents: usize,
    samples_per_agent: usize,
    dim: usize,
    seed: u64,
) -> Result<(Vec<RegressionDataset>, GroundTruth)> {
    check_sizes(n_agents, samples_per_agent, dim)?;
    let mut truth_rng = rng::stream(seed, Purpose::Data, u64::MAX);
    let theta = standard_normal_vec(&mut truth_rng, dim);
    synthesize_logistic_with(&theta, n_agents, samples_per_agent, seed)
}

/// Logistic data for a given generating parameter.
pub fn synthesize_logistic_with(
    theta_gen: &[f64],
    n_agents: usize,
    samples_per_agent: usize,
    seed: u64,
) -> Result<(Vec<RegressionDataset>, GroundTruth)> {
    let dim = theta_gen.len();
    check_sizes(n_agents, samples_per_agent, dim)?;
    let datasets = (0..n_agents)
        .map(|agent| {
            let mut rng = rng::stream(seed, Purpose::Data, agent as u64);
            let mut inputs = Vec::with_capacity(samples_per_agent);
            let mut targets = Vec::with_capacity(samples_per_agent);
            for _ in 0..samples_per_agent {
                let o = standard_normal_vec(&mut rng, dim);
                let v: f64 = rng.random();
                targets.push(logistic_label(theta_gen, &o, v));
                inputs.push(o);
            }
            RegressionDataset::new(inputs, targets, agent)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        datasets,
        GroundTruth {
            theta_star: theta_gen.to_vec(),
            noise_sigma: 0.0,
        },
    ))
}

fn check_sizes(n_agents: usize, samples: usize, dim: usize) -> Result<()> {
    for (name, v) in [
        ("n_agents", n_agents),
        ("samples_per_agent", samples),
        ("dim", dim),
    ] {
        if v == 0 {
            return Err(Error::config(name, "must be positive"));
        }
    }
    Ok(())
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn batch_check(data: &RegressionDataset, theta: &[f64], batch: &[usize]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    crate::linalg::check_dim(data.dim(), theta.len())
}

/// `(1/M) Σ (θᵀo − t)²` over the batch.
pub fn ridge_loss(theta: &[f64], data: &RegressionDataset, batch: &[usize]) -> Result<f64> {
    batch_check(data, theta, batch)?;
    let s: f64 = batch
        .iter()
        .map(|&i| {
            let (o, t) = data.sample(i);
            let r = dot(theta, o) - t;
            r * r
        })
        .sum();
    Ok(s / batch.len() as f64)
}

/// `(2/M) Σ (θᵀo − t) o` over the batch.
pub fn ridge_gradient(
    theta: &[f64],
    data: &RegressionDataset,
    batch: &[usize],
) -> Result<Vec<f64>> {
    batch_check(data, theta, batch)?;
    let mut g = vec![0.0; theta.len()];
    for &i in batch {
        let (o, t) = data.sample(i);
        axpy(dot(theta, o) - t, o, &mut g);
    }
    let c = 2.0 / batch.len() as f64;
    g.iter_mut().for_each(|x| *x *= c);
    Ok(g)
}

/// `(1/M) Σ log(1 + exp(−t θᵀo))` over the batch.
pub fn logistic_loss(theta: &[f64], data: &RegressionDataset, batch: &[usize]) -> Result<f64> {
    batch_check(data, theta, batch)?;
    let s: f64 = batch
        .iter()
        .map(|&i| {
            let (o, t) = data.sample(i);
            softplus(-t * dot(theta, o))
        })
        .sum();
    Ok(s / batch.len() as f64)
}

/// `(1/M) Σ −t o σ(−t θᵀo)` over the batch.
pub fn logistic_gradient(
    theta: &[f64],
    data: &RegressionDataset,
    batch: &[usize],
) -> Result<Vec<f64>> {
    batch_check(data, theta, batch)?;
    let mut g = vec![0.0; theta.len()];
    for &i in batch {
        let (o, t) = data.sample(i);
        axpy(-t * sigmoid(-t * dot(theta, o)), o, &mut g);
    }
    let c = 1.0 / batch.len() as f64;
    g.iter_mut().for_each(|x| *x *= c);
    Ok(g)
}

/// A regression loss over one agent's dataset, with an optional
/// `l2 · ‖θ‖²` penalty (zero by default).
#[derive(Debug, Clone)]
pub struct RegressionObjective {
    kind: RegressionKind,
    data: Arc<RegressionDataset>,
    l2: f64,
    all: Vec<usize>,
}

impl RegressionObjective {
    pub fn new(kind: RegressionKind, data: Arc<RegressionDataset>, l2: f64) -> Result<Self> {
        if kind == RegressionKind::Logistic && !data.has_binary_labels() {
            return Err(Error::InvalidEnvironment(
                "logistic targets must be ±1".into(),
            ));
        }
        let all = (0..data.len()).collect();
        Ok(RegressionObjective {
            kind,
            data,
            l2,
            all,
        })
    }

    pub fn kind(&self) -> RegressionKind {
        self.kind
    }

    pub fn data(&self) -> &RegressionDataset {
        &self.data
    }

    pub fn batch_loss(&self, theta: &[f64], batch: &[usize]) -> Result<f64> {
        let base = match self.kind {
            RegressionKind::Ridge => ridge_loss(theta, &self.data, batch)?,
            RegressionKind::Logistic => logistic_loss(theta, &self.data, batch)?,
        };
        Ok(base + self.l2 * norm_sq(theta))
    }

    pub fn batch_gradient(&self, theta: &[f64], batch: &[usize]) -> Result<Vec<f64>> {
        let mut g = match self.kind {
            RegressionKind::Ridge => ridge_gradient(theta, &self.data, batch)?,
            RegressionKind::Logistic => logistic_gradient(theta, &self.data, batch)?,
        };
        if self.l2 != 0.0 {
            axpy(2.0 * self.l2, theta, &mut g);
        }
        Ok(g)
    }

    /// Largest Hessian eigenvalue of the full ridge loss, which is its exact
    /// gradient Lipschitz constant. `None` for logistic objectives.
    pub fn ridge_lipschitz(&self) -> Option<f64> {
        if self.kind != RegressionKind::Ridge {
            return None;
        }
        let m = self.data.dim();
        let mut h = DMatrix::<f64>::zeros(m, m);
        for o in self.data.inputs() {
            let v = DVector::from_column_slice(o);
            h += &v * v.transpose();
        }
        h *= 2.0 / self.data.len() as f64;
        for d in 0..m {
            h[(d, d)] += 2.0 * self.l2;
        }
        let eig = h.symmetric_eigenvalues();
        Some(eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    }
}

impl Objective for RegressionObjective {
    fn dim(&self) -> usize {
        self.data.dim()
    }

    /// Samples uniformly with replacement. A batch at least as large as the
    /// dataset uses every sample once, which makes the estimate exact.
    fn stochastic_gradient(
        &self,
        theta: &[f64],
        batch_size: usize,
        rng: &mut dyn RngCore,
    ) -> Result<GradientSample> {
        if batch_size == 0 {
            return Err(Error::EmptyBatch);
        }
        let n = self.data.len();
        let (gradient, samples) = if batch_size >= n {
            (self.batch_gradient(theta, &self.all)?, n)
        } else {
            let batch: Vec<usize> = (0..batch_size).map(|_| rng.random_range(0..n)).collect();
            (self.batch_gradient(theta, &batch)?, batch_size)
        };
        Ok(GradientSample {
            gradient,
            samples,
            mean_return: None,
        })
    }

    fn full_gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        self.batch_gradient(theta, &self.all).ok()
    }

    fn loss(&self, theta: &[f64]) -> Option<f64> {
        self.batch_loss(theta, &self.all).ok()
    }

    fn dataset_size(&self) -> Option<usize> {
        Some(self.data.len())
    }
}

/// Minimizer of `Σ_i f_i(θ)` over all agents' data.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralSolution {
    pub theta: Vec<f64>,
    /// Set when the normal matrix was singular and a `1e-12` ridge was added.
    pub regularized: bool,
}

/// Solves the pooled problem exactly (ridge: normal equations) or to a
/// gradient norm of `1e-10` (logistic: damped Newton with backtracking).
pub fn centralized_solve(objectives: &[RegressionObjective]) -> Result<CentralSolution> {
    let first = objectives.first().ok_or(Error::EmptyBatch)?;
    match first.kind {
        RegressionKind::Ridge => solve_ridge(objectives),
        RegressionKind::Logistic => solve_logistic(objectives),
    }
}

fn solve_ridge(objectives: &[RegressionObjective]) -> Result<CentralSolution> {
    let m = objectives[0].dim();
    let mut a = DMatrix::<f64>::zeros(m, m);
    let mut b = DVector::<f64>::zeros(m);
    for obj in objectives {
        let w = 1.0 / obj.data.len() as f64;
        for (o, &t) in obj.data.inputs().iter().zip(obj.data.targets()) {
            let v = DVector::from_column_slice(o);
            a += (&v * v.transpose()) * w;
            b += v * (t * w);
        }
        for d in 0..m {
            a[(d, d)] += obj.l2;
        }
    }
    if let Some(ch) = a.clone().cholesky() {
        return Ok(CentralSolution {
            theta: ch.solve(&b).iter().copied().collect(),
            regularized: false,
        });
    }
    for d in 0..m {
        a[(d, d)] += 1e-12;
    }
    let ch = a.cholesky().ok_or(Error::SingularSystem)?;
    Ok(CentralSolution {
        theta: ch.solve(&b).iter().copied().collect(),
        regularized: true,
    })
}

fn solve_logistic(objectives: &[RegressionObjective]) -> Result<CentralSolution> {
    let m = objectives[0].dim();
    let value = |theta: &[f64]| -> f64 { objectives.iter().filter_map(|o| o.loss(theta)).sum() };
    let grad = |theta: &[f64]| -> Vec<f64> {
        let mut g = vec![0.0; m];
        for o in objectives {
            if let Some(gi) = o.full_gradient(theta) {
                axpy(1.0, &gi, &mut g);
            }
        }
        g
    };
    let hessian = |theta: &[f64]| -> DMatrix<f64> {
        let mut h = DMatrix::<f64>::zeros(m, m);
        for obj in objectives {
            let w = 1.0 / obj.data.len() as f64;
            for o in obj.data.inputs() {
                let s = sigmoid(dot(theta, o));
                let v = DVector::from_column_slice(o);
                h += (&v * v.transpose()) * (w * s * (1.0 - s));
            }
            for d in 0..m {
                h[(d, d)] += obj.l2;
            }
        }
        h
    };
    // Damped Newton with Armijo backtracking.
    let mut theta = vec![0.0; m];
    let mut f = value(&theta);
    for _ in 0..500 {
        let g = grad(&theta);
        if norm_sq(&g).sqrt() <= 1e-10 {
            return Ok(CentralSolution {
                theta,
                regularized: false,
            });
        }
        let gv = DVector::from_column_slice(&g);
        let dir = match hessian(&theta).cholesky() {
            Some(ch) => -ch.solve(&gv),
            None => -gv.clone(),
        };
        let slope = gv.dot(&dir);
        let mut step = 1.0;
        loop {
            let cand: Vec<f64> = theta
                .iter()
                .zip(dir.iter())
                .map(|(t, d)| t + step * d)
                .collect();
            let fc = value(&cand);
            if fc <= f + 1e-4 * step * slope || step < 1e-12 {
                theta = cand;
                f = fc;
                break;
            }
            step *= 0.5;
        }
    }
    Err(Error::SingularSystem)
}

/// Writes datasets as CSV rows `f0,…,f{m−1},target,agent`.
pub fn write_datasets_csv<W: Write>(datasets: &[RegressionDataset], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let m = datasets.first().map(|d| d.dim()).unwrap_or(0);
    let mut header: Vec<String> = (0..m).map(|d| format!("f{d}")).collect();
    header.push("target".into());
    header.push("agent".into());
    w.write_record(&header)?;
    for d in datasets {
        for (o, t) in d.inputs().iter().zip(d.targets()) {
            let mut row: Vec<String> = o.iter().map(|x| format!("{x:?}")).collect();
            row.push(format!("{t:?}"));
            row.push(d.owner().to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads datasets written by [`write_datasets_csv`], grouped by agent.
pub fn read_datasets_csv<R: Read>(input: R) -> Result<Vec<RegressionDataset>> {
    let mut r = csv::Reader::from_reader(input);
    let mut groups: std::collections::BTreeMap<usize, (Vec<Vec<f64>>, Vec<f64>)> =
        Default::default();
    for rec in r.records() {
        let rec = rec?;
        let n = rec.len();
        if n < 3 {
            return Err(Error::Parse("dataset row too short".into()));
        }
        let num = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{s}`")))
        };
        let o = (0..n - 2)
            .map(|i| num(&rec[i]))
            .collect::<Result<Vec<_>>>()?;
        let t = num(&rec[n - 2])?;
        let agent = rec[n - 1]
            .parse::<usize>()
            .map_err(|_| Error::Parse("bad agent index".into()))?;
        let entry = groups.entry(agent).or_default();
        entry.0.push(o);
        entry.1.push(t);
    }
    groups
        .into_iter()
        .map(|(agent, (inputs, targets))| RegressionDataset::new(inputs, targets, agent))
        .collect()
}
