//! Policy-gradient objectives: MDP interface, soft-max policy, REINFORCE.
//!
//! Environments report a per-step *loss*; rewards are its negation and are
//! what the metrics show.

pub mod chain;
pub mod exact;
pub mod localization;
pub mod resource;

use std::fmt::Debug;
use std::io::Write;

use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::linalg::{axpy, check_dim, dot, scaled};
use crate::objective::{GradientSample, Objective};

/// A finite-action MDP with a linear feature map.
pub trait Mdp: Send + Sync {
    type State: Clone + Debug + Send + Sync;

    fn num_actions(&self) -> usize;

    /// Dimension `m` of `φ(s, a)`.
    fn feature_dim(&self) -> usize;

    /// Writes `φ(s, a)` into `out`, overwriting every entry.
    fn features(&self, state: &Self::State, action: usize, out: &mut [f64]);

    /// Draws `s_0 ~ β_i`.
    fn initial_state(&self, rng: &mut dyn RngCore) -> Self::State;

    /// Returns the next state and the loss `g_i(s, a)`.
    fn step(
        &self,
        state: &Self::State,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(Self::State, f64)>;

    /// Episode length `T`.
    fn horizon(&self) -> usize;

    /// Discount `α`.
    fn discount(&self) -> f64;

    /// Short text form of a state for CSV dumps.
    fn state_label(&self, state: &Self::State) -> String {
        format!("{state:?}")
    }
}

fn logits<E: Mdp + ?Sized>(theta: &[f64], state: &E::State, mdp: &E) -> Vec<f64> {
    let mut phi = vec![0.0; mdp.feature_dim()];
    (0..mdp.num_actions())
        .map(|a| {
            mdp.features(state, a, &mut phi);
            dot(theta, &phi)
        })
        .collect()
}

/// `π(a|s; θ) ∝ exp(θᵀφ(s, a))`, computed with max-subtraction.
pub fn policy_probs<E: Mdp + ?Sized>(theta: &[f64], state: &E::State, mdp: &E) -> Vec<f64> {
    let l = logits(theta, state, mdp);
    let top = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = l.iter().map(|x| (x - top).exp()).collect();
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    p
}

/// Score function `φ(s, a) − Σ_u π(u|s) φ(s, u)`.
pub fn grad_log_policy<E: Mdp + ?Sized>(
    theta: &[f64],
    state: &E::State,
    action: usize,
    mdp: &E,
) -> Vec<f64> {
    let probs = policy_probs(theta, state, mdp);
    let mut phi = vec![0.0; mdp.feature_dim()];
    let mut out = vec![0.0; mdp.feature_dim()];
    for (u, &p) in probs.iter().enumerate() {
        mdp.features(state, u, &mut phi);
        axpy(-p, &phi, &mut out);
    }
    mdp.features(state, action, &mut phi);
    axpy(1.0, &phi, &mut out);
    out
}

fn sample_index(probs: &[f64], rng: &mut dyn RngCore) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (a, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    probs.len() - 1
}

/// Draws an action from `π(·|s; θ)`.
pub fn sample_action<E: Mdp + ?Sized>(
    theta: &[f64],
    state: &E::State,
    mdp: &E,
    rng: &mut dyn RngCore,
) -> usize {
    sample_index(&policy_probs(theta, state, mdp), rng)
}

/// One episode together with the policy parameter that generated it.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S> {
    /// `s_0 … s_T`.
    pub states: Vec<S>,
    /// `a_0 … a_{T−1}`.
    pub actions: Vec<usize>,
    /// `g(s_t, a_t)`; rewards are the negation.
    pub losses: Vec<f64>,
    pub agent: usize,
    pub theta: Vec<f64>,
}

impl<S> Trajectory<S> {
    /// `Σ_t α^t g(s_t, a_t)`.
    pub fn discounted_loss(&self, discount: f64) -> f64 {
        let mut w = 1.0;
        let mut total = 0.0;
        for &g in &self.losses {
            total += w * g;
            w *= discount;
        }
        total
    }

    /// Undiscounted reward `−Σ_t g(s_t, a_t)`.
    pub fn total_reward(&self) -> f64 {
        -self.losses.iter().sum::<f64>()
    }
}

/// Rolls out `horizon` steps of `π(·|θ)` from `s_0 ~ β`.
pub fn sample_trajectory<E: Mdp + ?Sized>(
    mdp: &E,
    theta: &[f64],
    horizon: usize,
    agent: usize,
    rng: &mut dyn RngCore,
) -> Result<Trajectory<E::State>> {
    check_dim(mdp.feature_dim(), theta.len())?;
    if horizon == 0 {
        return Err(Error::InvalidEnvironment(
            "horizon must be at least 1".into(),
        ));
    }
    let mut s = mdp.initial_state(rng);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut losses = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let a = sample_action(theta, &s, mdp, rng);
        let (next, g) = mdp.step(&s, a, rng)?;
        states.push(std::mem::replace(&mut s, next));
        actions.push(a);
        losses.push(g);
    }
    states.push(s);
    Ok(Trajectory {
        states,
        actions,
        losses,
        agent,
        theta: theta.to_vec(),
    })
}

/// REINFORCE: `[Σ_t ∇log π(a_t|s_t; θ)] · [Σ_t α^t g(s_t, a_t)]`.
pub fn reinforce_gradient<E: Mdp + ?Sized>(
    trajectory: &Trajectory<E::State>,
    theta: &[f64],
    mdp: &E,
) -> Result<Vec<f64>> {
    if trajectory.theta.as_slice() != theta {
        return Err(Error::StaleTrajectory);
    }
    let mut score = vec![0.0; theta.len()];
    for (s, &a) in trajectory.states.iter().zip(&trajectory.actions) {
        axpy(1.0, &grad_log_policy(theta, s, a, mdp), &mut score);
    }
    Ok(scaled(trajectory.discounted_loss(mdp.discount()), &score))
}

/// Mini-batch policy gradient over `batch_size` fresh trajectories, plus the
/// mean undiscounted reward of those trajectories.
pub fn minibatch_pg<E: Mdp + ?Sized>(
    theta: &[f64],
    mdp: &E,
    batch_size: usize,
    horizon: usize,
    agent: usize,
    rng: &mut dyn RngCore,
) -> Result<(Vec<f64>, f64)> {
    if batch_size == 0 {
        return Err(Error::EmptyBatch);
    }
    let mut grad = vec![0.0; theta.len()];
    let mut reward = 0.0;
    for _ in 0..batch_size {
        let traj = sample_trajectory(mdp, theta, horizon, agent, rng)?;
        axpy(1.0, &reinforce_gradient(&traj, theta, mdp)?, &mut grad);
        reward += traj.total_reward();
    }
    let inv = 1.0 / batch_size as f64;
    Ok((scaled(inv, &grad), reward * inv))
}

/// The objective `J_i(θ)` of one agent, estimated by REINFORCE.
pub struct PolicyGradientObjective<E> {
    pub mdp: E,
    pub agent: usize,
}

impl<E: Mdp> PolicyGradientObjective<E> {
    pub fn new(mdp: E, agent: usize) -> Self {
        PolicyGradientObjective { mdp, agent }
    }
}

impl<E: Mdp> Objective for PolicyGradientObjective<E> {
    fn dim(&self) -> usize {
        self.mdp.feature_dim()
    }

    fn stochastic_gradient(
        &self,
        theta: &[f64],
        batch_size: usize,
        rng: &mut dyn RngCore,
    ) -> Result<GradientSample> {
        let (gradient, mean_return) = minibatch_pg(
            theta,
            &self.mdp,
            batch_size,
            self.mdp.horizon(),
            self.agent,
            rng,
        )?;
        Ok(GradientSample {
            gradient,
            samples: batch_size,
            mean_return: Some(mean_return),
        })
    }
}

/// Writes `step,state,action,reward` rows.
pub fn write_trajectory_csv<E: Mdp + ?Sized, W: Write>(
    mdp: &E,
    trajectory: &Trajectory<E::State>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "state", "action", "reward"])?;
    for (t, ((s, a), g)) in trajectory
        .states
        .iter()
        .zip(&trajectory.actions)
        .zip(&trajectory.losses)
        .enumerate()
    {
        w.write_record([
            t.to_string(),
            mdp.state_label(s),
            a.to_string(),
            (-g).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::chain::TwoStateChain;
    use super::*;
    use crate::rng::{self, Purpose};

    #[test]
    fn uniform_at_zero() {
        let mdp = TwoStateChain::default();
        let p = policy_probs(&[0.0; 4], &0, &mdp);
        assert_eq!(p, vec![0.5, 0.5]);
    }

    #[test]
    fn log_three_gap() {
        let mdp = TwoStateChain::default();
        // In state 0 the logits are θ[0] and θ[1].
        let p = policy_probs(&[3f64.ln(), 0.0, 0.0, 0.0], &0, &mdp);
        assert!((p[0] - 0.75).abs() < 1e-15 && (p[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn score_is_zero_mean() {
        let mdp = TwoStateChain::default();
        let theta = [0.3, -1.2, 2.0, 0.1];
        for s in 0..2 {
            let p = policy_probs(&theta, &s, &mdp);
            let mut acc = vec![0.0; 4];
            for (a, pa) in p.iter().enumerate() {
                axpy(*pa, &grad_log_policy(&theta, &s, a, &mdp), &mut acc);
            }
            assert!(acc.iter().all(|x| x.abs() < 1e-12));
        }
    }

    #[test]
    fn zero_losses_give_zero_gradient() {
        let mdp = TwoStateChain::with_losses([[0.0; 2]; 2]);
        let mut r = rng::stream(1, Purpose::Sampling, 0);
        let theta = [0.5, 0.1, -0.3, 0.2];
        let t = sample_trajectory(&mdp, &theta, 3, 0, &mut r).unwrap();
        assert!(reinforce_gradient(&t, &theta, &mdp)
            .unwrap()
            .iter()
            .all(|x| *x == 0.0));
    }

    #[test]
    fn stale_trajectory_is_rejected() {
        let mdp = TwoStateChain::default();
        let mut r = rng::stream(1, Purpose::Sampling, 0);
        let t = sample_trajectory(&mdp, &[0.0; 4], 3, 0, &mut r).unwrap();
        assert!(matches!(
            reinforce_gradient(&t, &[0.1, 0.0, 0.0, 0.0], &mdp),
            Err(Error::StaleTrajectory)
        ));
    }

    #[test]
    fn one_step_hand_case() {
        // Uniform policy over two actions, T = 1: gradient = (φ(s,a) − φ̄)·g(s,a).
        let mdp = TwoStateChain::default();
        let theta = [0.0; 4];
        let t = Trajectory {
            states: vec![0, 1],
            actions: vec![1],
            losses: vec![2.5],
            agent: 0,
            theta: theta.to_vec(),
        };
        let g = reinforce_gradient(&t, &theta, &mdp).unwrap();
        assert_eq!(g, vec![-1.25, 1.25, 0.0, 0.0]);
    }

    #[test]
    fn trajectory_csv_has_one_row_per_step() {
        let mdp = TwoStateChain::default();
        let mut r = rng::stream(3, Purpose::Sampling, 0);
        let t = sample_trajectory(&mdp, &[0.0; 4], 3, 0, &mut r).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mdp, &t, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("step,state,action,reward"));
    }
}
