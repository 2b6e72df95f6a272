//! Small MDPs with closed-form behaviour, for testing estimators.

use rand::{Rng, RngCore};

use super::exact::EnumerableMdp;
use super::{policy_probs, Mdp};
use crate::error::Result;

/// Two states, two actions, one-hot `(state, action)` features.
#[derive(Debug, Clone)]
pub struct TwoStateChain {
    /// `P(s' = 1 | s, a)`.
    pub to_one: [[f64; 2]; 2],
    /// `g(s, a)`.
    pub losses: [[f64; 2]; 2],
    /// `P(s_0 = 1)`.
    pub start_one: f64,
    pub horizon: usize,
    pub discount: f64,
}

impl Default for TwoStateChain {
    fn default() -> Self {
        TwoStateChain {
            to_one: [[0.2, 0.7], [0.6, 0.1]],
            losses: [[1.0, -0.5], [2.0, 0.3]],
            start_one: 0.35,
            horizon: 3,
            discount: 0.9,
        }
    }
}

impl TwoStateChain {
    pub fn with_losses(losses: [[f64; 2]; 2]) -> Self {
        TwoStateChain {
            losses,
            ..Default::default()
        }
    }

    /// `P(s_t = 1)` for `t = 0..=T`, by forward recursion of the induced
    /// Markov chain.
    pub fn state_marginals(&self, theta: &[f64]) -> Vec<f64> {
        let mut p1 = self.start_one;
        let mut out = vec![p1];
        for _ in 0..self.horizon {
            let mut next = 0.0;
            for (s, ps) in [(0usize, 1.0 - p1), (1, p1)] {
                let pi = policy_probs(theta, &s, self);
                next += ps * (pi[0] * self.to_one[s][0] + pi[1] * self.to_one[s][1]);
            }
            p1 = next;
            out.push(p1);
        }
        out
    }
}

impl Mdp for TwoStateChain {
    type State = usize;

    fn num_actions(&self) -> usize {
        2
    }

    fn feature_dim(&self) -> usize {
        4
    }

    fn features(&self, state: &usize, action: usize, out: &mut [f64]) {
        out.fill(0.0);
        out[state * 2 + action] = 1.0;
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> usize {
        usize::from(rng.random::<f64>() < self.start_one)
    }

    fn step(&self, state: &usize, action: usize, rng: &mut dyn RngCore) -> Result<(usize, f64)> {
        let next = usize::from(rng.random::<f64>() < self.to_one[*state][action]);
        Ok((next, self.losses[*state][action]))
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn state_label(&self, state: &usize) -> String {
        state.to_string()
    }
}

impl EnumerableMdp for TwoStateChain {
    fn initial_distribution(&self) -> Vec<(usize, f64)> {
        vec![(0, 1.0 - self.start_one), (1, self.start_one)]
    }

    fn transitions(&self, state: &usize, action: usize) -> Vec<(usize, f64, f64)> {
        let p = self.to_one[*state][action];
        let g = self.losses[*state][action];
        vec![(0, 1.0 - p, g), (1, p, g)]
    }
}

/// One state, one action, constant loss.
#[derive(Debug, Clone)]
pub struct SingleActionMdp {
    pub loss: f64,
    pub horizon: usize,
}

impl Mdp for SingleActionMdp {
    type State = ();

    fn num_actions(&self) -> usize {
        1
    }

    fn feature_dim(&self) -> usize {
        2
    }

    fn features(&self, _: &(), _: usize, out: &mut [f64]) {
        out.copy_from_slice(&[1.0, -0.5]);
    }

    fn initial_state(&self, _: &mut dyn RngCore) {}

    fn step(&self, _: &(), _: usize, _: &mut dyn RngCore) -> Result<((), f64)> {
        Ok(((), self.loss))
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn discount(&self) -> f64 {
        0.99
    }
}
