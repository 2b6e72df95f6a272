//! Exhaustive trajectory enumeration for small MDPs.

use super::{policy_probs, reinforce_gradient, Mdp, Trajectory};
use crate::error::Result;
use crate::linalg::axpy;

/// An MDP whose initial distribution and transition kernel can be listed.
pub trait EnumerableMdp: Mdp {
    /// `(s_0, β(s_0))` pairs.
    fn initial_distribution(&self) -> Vec<(Self::State, f64)>;

    /// `(s', P(s'|s, a), g(s, a))` triples.
    fn transitions(&self, state: &Self::State, action: usize) -> Vec<(Self::State, f64, f64)>;
}

/// Every length-`horizon` trajectory under `π(·|θ)` with its probability.
pub fn enumerate_trajectories<E: EnumerableMdp>(
    mdp: &E,
    theta: &[f64],
    horizon: usize,
) -> Vec<(Trajectory<E::State>, f64)> {
    let mut out = Vec::new();
    for (s0, p0) in mdp.initial_distribution() {
        let start = Trajectory {
            states: vec![s0],
            actions: Vec::new(),
            losses: Vec::new(),
            agent: 0,
            theta: theta.to_vec(),
        };
        extend(mdp, theta, horizon, start, p0, &mut out);
    }
    out
}

fn extend<E: EnumerableMdp>(
    mdp: &E,
    theta: &[f64],
    horizon: usize,
    prefix: Trajectory<E::State>,
    prob: f64,
    out: &mut Vec<(Trajectory<E::State>, f64)>,
) {
    if prefix.actions.len() == horizon {
        out.push((prefix, prob));
        return;
    }
    let s = prefix.states.last().expect("non-empty prefix").clone();
    let pi = policy_probs(theta, &s, mdp);
    for (a, pa) in pi.iter().enumerate() {
        for (next, pn, g) in mdp.transitions(&s, a) {
            if pn == 0.0 {
                continue;
            }
            let mut t = prefix.clone();
            t.actions.push(a);
            t.losses.push(g);
            t.states.push(next);
            extend(mdp, theta, horizon, t, prob * pa * pn, out);
        }
    }
}

/// `J(θ) = E[Σ_t α^t g(s_t, a_t)]` summed over all trajectories.
pub fn exact_objective<E: EnumerableMdp>(mdp: &E, theta: &[f64], horizon: usize) -> f64 {
    enumerate_trajectories(mdp, theta, horizon)
        .iter()
        .map(|(t, p)| p * t.discounted_loss(mdp.discount()))
        .sum()
}

/// Exact expectation of the REINFORCE estimator.
pub fn exact_reinforce_mean<E: EnumerableMdp>(
    mdp: &E,
    theta: &[f64],
    horizon: usize,
) -> Result<Vec<f64>> {
    let mut mean = vec![0.0; theta.len()];
    for (t, p) in enumerate_trajectories(mdp, theta, horizon) {
        axpy(p, &reinforce_gradient(&t, theta, mdp)?, &mut mean);
    }
    Ok(mean)
}
