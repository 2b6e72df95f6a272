//! The local-loss interface shared by every optimizer.

use rand::RngCore;

use crate::error::Result;

/// One draw of a stochastic gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample {
    pub gradient: Vec<f64>,
    /// Number of samples (data points or trajectories) consumed.
    pub samples: usize,
    /// Mean undiscounted episode reward of the sampled trajectories, for
    /// reinforcement-learning objectives.
    pub mean_return: Option<f64>,
}

/// A per-agent loss `f_i` with a stochastic first-order oracle.
pub trait Objective: Send + Sync {
    /// Parameter dimension `m`.
    fn dim(&self) -> usize;

    /// Mini-batch gradient `G_i(θ; ζ)` from `batch_size` samples.
    fn stochastic_gradient(
        &self,
        theta: &[f64],
        batch_size: usize,
        rng: &mut dyn RngCore,
    ) -> Result<GradientSample>;

    /// Exact `∇f_i(θ)`, when it is computable.
    fn full_gradient(&self, _theta: &[f64]) -> Option<Vec<f64>> {
        None
    }

    /// Exact `f_i(θ)`, when it is computable.
    fn loss(&self, _theta: &[f64]) -> Option<f64> {
        None
    }

    /// Size of the local dataset `|D_i|`, for finite-sample objectives.
    fn dataset_size(&self) -> Option<usize> {
        None
    }
}
