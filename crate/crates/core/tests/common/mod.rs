#![allow(dead_code)]

use std::sync::Arc;

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

use decadmm::objective::{GradientSample, Objective};
use decadmm::problems::{synthesize_ridge, RegressionKind, RegressionObjective};
use decadmm::Result;

/// `f(θ) = ½ Σ_d a_d (θ_d − c_d)²`; each sample adds `N(0, s²)` noise to
/// every gradient coordinate.
#[derive(Debug, Clone)]
pub struct NoisyQuadratic {
    pub curvature: Vec<f64>,
    pub center: Vec<f64>,
    pub noise: f64,
}

impl NoisyQuadratic {
    pub fn isotropic(center: Vec<f64>, noise: f64) -> Self {
        NoisyQuadratic {
            curvature: vec![1.0; center.len()],
            center,
            noise,
        }
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.center)
            .zip(&self.curvature)
            .map(|((t, c), a)| a * (t - c))
            .collect()
    }

    /// `E‖G(θ; ζ) − ∇f(θ)‖²` for a single sample.
    pub fn per_sample_variance(&self) -> f64 {
        self.noise * self.noise * self.center.len() as f64
    }
}

impl Objective for NoisyQuadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn stochastic_gradient(
        &self,
        theta: &[f64],
        batch_size: usize,
        rng: &mut dyn RngCore,
    ) -> Result<GradientSample> {
        let mut g = self.gradient(theta);
        let scale = self.noise / (batch_size as f64).sqrt();
        for v in &mut g {
            let e: f64 = StandardNormal.sample(rng);
            *v += scale * e;
        }
        Ok(GradientSample {
            gradient: g,
            samples: batch_size,
            mean_return: None,
        })
    }

    fn full_gradient(&self, theta: &[f64]) -> Option<Vec<f64>> {
        Some(self.gradient(theta))
    }

    fn loss(&self, theta: &[f64]) -> Option<f64> {
        Some(
            theta
                .iter()
                .zip(&self.center)
                .zip(&self.curvature)
                .map(|((t, c), a)| 0.5 * a * (t - c) * (t - c))
                .sum(),
        )
    }

    fn dataset_size(&self) -> Option<usize> {
        None
    }
}

pub fn ridge_objectives(
    n: usize,
    samples: usize,
    dim: usize,
    seed: u64,
) -> (Vec<RegressionObjective>, Vec<f64>) {
    let (data, truth) = synthesize_ridge(n, samples, dim, 0.1, seed).unwrap();
    let objs = data
        .into_iter()
        .map(|d| RegressionObjective::new(RegressionKind::Ridge, Arc::new(d), 0.0).unwrap())
        .collect();
    (objs, truth.theta_star)
}

pub fn shared(objs: Vec<RegressionObjective>) -> Vec<Arc<dyn Objective>> {
    objs.into_iter()
        .map(|o| Arc::new(o) as Arc<dyn Objective>)
        .collect()
}

pub fn shared_quadratics(objs: Vec<NoisyQuadratic>) -> Vec<Arc<dyn Objective>> {
    objs.into_iter()
        .map(|o| Arc::new(o) as Arc<dyn Objective>)
        .collect()
}

/// Central difference of `f` along coordinate `d`.
pub fn central_difference(f: impl Fn(&[f64]) -> f64, x: &[f64], d: usize, h: f64) -> f64 {
    let mut p = x.to_vec();
    let mut m = x.to_vec();
    p[d] += h;
    m[d] -= h;
    (f(&p) - f(&m)) / (2.0 * h)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

pub fn mean_and_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}
