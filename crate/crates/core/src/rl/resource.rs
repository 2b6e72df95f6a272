//! Computation-resource management with Poisson task arrivals.
//!
//! The agent holds `s` idle resource units and may request `a` more each
//! interval. Tasks arrive as `W ~ Poisson(d)` and each busy unit finishes
//! with probability `1 − e^{−1/r}`. When a task arrives or finishes, the
//! request is served: the pool becomes `min(s + a, C)`, up to `W` tasks take
//! a unit each, and the reward is
//! `−h0·[a > 0] − h1·s − h2·(pool − s)⁺ + p·(pool − s')⁺`.
//! Otherwise nothing moves and only the holding cost `−h1·s` applies.

use std::io::Write;

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{sample_action, Mdp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prices {
    /// Fixed cost of issuing a request.
    pub h0: f64,
    /// Holding cost per idle unit.
    pub h1: f64,
    /// Price per acquired unit.
    pub h2: f64,
    /// Listed with the others but absent from the reward; kept for reference.
    pub h3: f64,
    /// Payment per served task.
    pub p: f64,
}

impl Default for Prices {
    fn default() -> Self {
        Prices {
            h0: 4.0,
            h1: 2.0,
            h2: 2.0,
            h3: 3.0,
            p: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResourceState {
    /// Idle units `s`.
    pub available: usize,
    /// Units serving tasks.
    pub busy: usize,
    /// Tasks that arrived in the interval that led here.
    pub arrivals: usize,
}

/// What happened in one interval; used for policy traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub event: bool,
    pub arrivals: usize,
    pub completions: usize,
    pub served: usize,
    pub reward: f64,
    pub next: ResourceState,
}

#[derive(Debug, Clone)]
pub struct ResourceEnv {
    pub capacity: usize,
    pub arrival_rate: f64,
    pub workload_mean: f64,
    pub prices: Prices,
    pub horizon: usize,
    pub discount: f64,
    arrivals: Poisson<f64>,
}

pub fn make_resource_env(
    capacity: usize,
    arrival_rate: f64,
    workload_mean: f64,
    prices: Prices,
    horizon: usize,
    discount: f64,
) -> Result<ResourceEnv> {
    if capacity == 0 {
        return Err(Error::InvalidEnvironment(
            "capacity must be at least 1".into(),
        ));
    }
    if workload_mean.is_nan() || workload_mean <= 0.0 {
        return Err(Error::InvalidEnvironment(
            "workload mean must be positive".into(),
        ));
    }
    if horizon == 0 {
        return Err(Error::InvalidEnvironment(
            "horizon must be at least 1".into(),
        ));
    }
    if !(discount > 0.0 && discount < 1.0) {
        return Err(Error::InvalidEnvironment(
            "discount must lie in (0, 1)".into(),
        ));
    }
    let arrivals = Poisson::new(arrival_rate)
        .map_err(|e| Error::InvalidEnvironment(format!("arrival rate {arrival_rate}: {e}")))?;
    Ok(ResourceEnv {
        capacity,
        arrival_rate,
        workload_mean,
        prices,
        horizon,
        discount,
        arrivals,
    })
}

impl ResourceEnv {
    pub fn completion_probability(&self) -> f64 {
        1.0 - (-1.0 / self.workload_mean).exp()
    }

    /// Applies `action` given the interval's arrivals and completions.
    pub fn transition(
        &self,
        state: &ResourceState,
        action: usize,
        arrivals: usize,
        completions: usize,
    ) -> Interval {
        let s = state.available;
        let busy = state.busy - completions.min(state.busy);
        let event = arrivals > 0 || completions > 0;
        let pr = &self.prices;
        if !event {
            return Interval {
                event,
                arrivals,
                completions,
                served: 0,
                reward: -pr.h1 * s as f64,
                next: ResourceState {
                    available: s,
                    busy,
                    arrivals,
                },
            };
        }
        let pool = (s + action).min(self.capacity);
        let served = arrivals.min(pool);
        let next = pool - served;
        let request = if action > 0 { pr.h0 } else { 0.0 };
        let reward =
            -request - pr.h1 * s as f64 - pr.h2 * (pool - s) as f64 + pr.p * (pool - next) as f64;
        Interval {
            event,
            arrivals,
            completions,
            served,
            reward,
            next: ResourceState {
                available: next,
                busy: busy + served,
                arrivals,
            },
        }
    }

    /// Samples one interval.
    pub fn simulate(
        &self,
        state: &ResourceState,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> Interval {
        let arrivals = self.arrivals.sample(rng) as usize;
        let q = self.completion_probability();
        let completions = (0..state.busy).filter(|_| rng.random::<f64>() < q).count();
        self.transition(state, action, arrivals, completions)
    }
}

/// Action rule for a policy test.
#[derive(Debug, Clone, Copy)]
pub enum TestPolicy<'a> {
    /// Soft-max policy with the given parameter.
    Softmax(&'a [f64]),
    /// Every request size equally likely.
    Uniform,
}

/// One interval of a policy test.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub state: ResourceState,
    pub action: usize,
    pub outcome: Interval,
}

/// Runs `intervals` consecutive intervals from the initial state.
pub fn run_policy(
    env: &ResourceEnv,
    policy: TestPolicy<'_>,
    intervals: usize,
    rng: &mut dyn RngCore,
) -> Vec<TraceRow> {
    let mut state = env.initial_state(rng);
    let mut rows = Vec::with_capacity(intervals);
    for _ in 0..intervals {
        let action = match policy {
            TestPolicy::Softmax(theta) => sample_action(theta, &state, env, rng),
            TestPolicy::Uniform => rng.random_range(0..=env.capacity),
        };
        let outcome = env.simulate(&state, action, rng);
        rows.push(TraceRow {
            state,
            action,
            outcome,
        });
        state = outcome.next;
    }
    rows
}

/// Mean reward per interval.
pub fn mean_profit(rows: &[TraceRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().map(|r| r.outcome.reward).sum::<f64>() / rows.len() as f64
}

/// Requested units next to the demand that arrived, one row per interval.
pub fn write_policy_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "interval",
        "available",
        "busy",
        "action",
        "arrivals",
        "served",
        "reward",
    ])?;
    for (t, r) in rows.iter().enumerate() {
        w.write_record([
            t.to_string(),
            r.state.available.to_string(),
            r.state.busy.to_string(),
            r.action.to_string(),
            r.outcome.arrivals.to_string(),
            r.outcome.served.to_string(),
            r.outcome.reward.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

impl Mdp for ResourceEnv {
    type State = ResourceState;

    fn num_actions(&self) -> usize {
        self.capacity + 1
    }

    /// One-hot over (idle units, request).
    fn feature_dim(&self) -> usize {
        (self.capacity + 1) * (self.capacity + 1)
    }

    fn features(&self, state: &ResourceState, action: usize, out: &mut [f64]) {
        out.fill(0.0);
        out[state.available.min(self.capacity) * (self.capacity + 1) + action] = 1.0;
    }

    fn initial_state(&self, _rng: &mut dyn RngCore) -> ResourceState {
        ResourceState {
            available: 0,
            busy: 0,
            arrivals: 0,
        }
    }

    fn step(
        &self,
        state: &ResourceState,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(ResourceState, f64)> {
        if action > self.capacity {
            return Err(Error::InvalidEnvironment(format!(
                "request {action} exceeds capacity {}",
                self.capacity
            )));
        }
        let i = self.simulate(state, action, rng);
        Ok((i.next, -i.reward))
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn state_label(&self, state: &ResourceState) -> String {
        state.available.to_string()
    }
}
