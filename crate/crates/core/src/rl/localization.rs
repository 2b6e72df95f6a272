//! Grid-world target localization.
//!
//! Each agent walks on a `grid_size × grid_size` lattice toward a fixed
//! target. A step earns `r_i` when the agent ends within `d0` of the target
//! and `−d` otherwise, where `d` is the Euclidean distance in cells. The
//! policy sees either the true position or a position estimate recovered
//! from a received-signal-strength (RSS) reading through the path-loss model
//! `P = l0·P0/d^ν + e`.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Mdp;
use crate::error::{Error, Result};

/// Moves, in action-index order.
pub const MOVES: [(i64, i64); 4] = [(0, 1), (0, -1), (-1, 0), (1, 0)];
pub const ACTION_NAMES: [&str; 4] = ["north", "south", "west", "east"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    pub l0: f64,
    pub nu: f64,
    pub p0: f64,
    /// Standard deviation of the additive RSS noise `e_i`.
    pub noise_sigma: f64,
    /// Smallest received power accepted when inverting the model.
    pub floor: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            l0: 20.7,
            nu: 3.04,
            p0: 1.0,
            noise_sigma: 0.01,
            floor: 1e-9,
        }
    }
}

impl ChannelModel {
    pub fn received_power(&self, distance: f64) -> f64 {
        self.l0 * self.p0 / distance.max(1e-12).powf(self.nu)
    }

    /// Distance implied by a received power reading.
    pub fn invert(&self, power: f64) -> f64 {
        (self.l0 * self.p0 / power.max(self.floor)).powf(1.0 / self.nu)
    }
}

/// Inclusive rectangle of cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalizationState {
    pub x: usize,
    pub y: usize,
    /// Position the policy observes.
    pub observed: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct LocalizationEnv {
    pub grid_size: usize,
    pub target: (f64, f64),
    pub d0: f64,
    /// Reward `r_i` for being within `d0`.
    pub priority: f64,
    pub start: Region,
    pub channel: ChannelModel,
    /// Feed true positions to the policy instead of RSS estimates.
    pub oracle_state: bool,
    /// Position buckets per axis in the feature map.
    pub buckets: usize,
    /// Value of the active one-hot feature.
    pub feature_scale: f64,
    pub horizon: usize,
    pub discount: f64,
}

/// Geometry and channel shared by every agent's environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationSpec {
    pub grid_size: usize,
    pub target: (f64, f64),
    pub d0: f64,
    pub heterogeneous: bool,
    /// Explicit `r_i`; defaults to 1 (homogeneous) or `i + 1` (heterogeneous).
    pub priorities: Option<Vec<f64>>,
    pub channel: ChannelModel,
    pub oracle_state: bool,
    pub buckets: usize,
    pub feature_scale: f64,
    pub horizon: usize,
    pub discount: f64,
}

impl Default for LocalizationSpec {
    fn default() -> Self {
        LocalizationSpec {
            grid_size: 20,
            target: (14.0, 14.0),
            d0: 1.0,
            heterogeneous: false,
            priorities: None,
            channel: ChannelModel::default(),
            oracle_state: true,
            buckets: 5,
            feature_scale: 1.0,
            horizon: 50,
            discount: 0.99,
        }
    }
}

/// Builds one environment per agent.
///
/// Homogeneous agents share `r_i` and start uniformly anywhere on the grid.
/// Heterogeneous agent `i` starts in the square `[0, s_i)²` with
/// `s_i = ⌈G(i+1)/N⌉`, so low-index agents explore less of the grid.
pub fn make_localization_env(
    spec: &LocalizationSpec,
    n_agents: usize,
) -> Result<Vec<LocalizationEnv>> {
    let g = spec.grid_size;
    if g < 2 {
        return Err(Error::InvalidEnvironment(
            "grid must be at least 2×2".into(),
        ));
    }
    let (tx, ty) = spec.target;
    let inside = |v: f64| (0.0..=(g - 1) as f64).contains(&v);
    if !inside(tx) || !inside(ty) {
        return Err(Error::InvalidEnvironment(format!(
            "target ({tx}, {ty}) outside the {g}×{g} grid"
        )));
    }
    if spec.d0.is_nan() || spec.d0 <= 0.0 {
        return Err(Error::InvalidEnvironment("d0 must be positive".into()));
    }
    if spec.buckets == 0 || spec.buckets > g {
        return Err(Error::InvalidEnvironment(format!(
            "bucket count {} must lie in 1..={g}",
            spec.buckets
        )));
    }
    if !(spec.feature_scale > 0.0 && spec.feature_scale.is_finite()) {
        return Err(Error::InvalidEnvironment(
            "feature scale must be positive".into(),
        ));
    }
    if spec.horizon == 0 {
        return Err(Error::InvalidEnvironment(
            "horizon must be at least 1".into(),
        ));
    }
    if !(spec.discount > 0.0 && spec.discount < 1.0) {
        return Err(Error::InvalidEnvironment(
            "discount must lie in (0, 1)".into(),
        ));
    }
    if n_agents == 0 {
        return Err(Error::InvalidSize { n: 0 });
    }
    let priorities: Vec<f64> = match &spec.priorities {
        Some(p) if p.len() == n_agents => p.clone(),
        Some(p) => {
            return Err(Error::InvalidEnvironment(format!(
                "{} priorities for {n_agents} agents",
                p.len()
            )))
        }
        None if spec.heterogeneous => (1..=n_agents).map(|i| i as f64).collect(),
        None => vec![1.0; n_agents],
    };
    Ok((0..n_agents)
        .map(|i| {
            let start = if spec.heterogeneous {
                let side = (g * (i + 1)).div_ceil(n_agents).max(1);
                Region {
                    x0: 0,
                    x1: side - 1,
                    y0: 0,
                    y1: side - 1,
                }
            } else {
                Region {
                    x0: 0,
                    x1: g - 1,
                    y0: 0,
                    y1: g - 1,
                }
            };
            LocalizationEnv {
                grid_size: g,
                target: spec.target,
                d0: spec.d0,
                priority: priorities[i],
                start,
                channel: spec.channel,
                oracle_state: spec.oracle_state,
                buckets: spec.buckets,
                feature_scale: spec.feature_scale,
                horizon: spec.horizon,
                discount: spec.discount,
            }
        })
        .collect())
}

impl LocalizationEnv {
    pub fn distance(&self, x: usize, y: usize) -> f64 {
        let dx = x as f64 - self.target.0;
        let dy = y as f64 - self.target.1;
        (dx * dx + dy * dy).sqrt()
    }

    /// Reward for ending a step at `(x, y)`.
    pub fn reward_at(&self, x: usize, y: usize) -> f64 {
        let d = self.distance(x, y);
        if d < self.d0 {
            self.priority
        } else {
            -d
        }
    }

    fn observe(&self, x: usize, y: usize, rng: &mut dyn RngCore) -> (f64, f64) {
        if self.oracle_state {
            return (x as f64, y as f64);
        }
        let d = self.distance(x, y);
        if d == 0.0 {
            return self.target;
        }
        let noise = Normal::new(0.0, self.channel.noise_sigma)
            .map(|n| n.sample(rng))
            .unwrap_or(0.0);
        let power = self.channel.received_power(d) + noise;
        let est = self.channel.invert(power);
        let hi = (self.grid_size - 1) as f64;
        let ox = self.target.0 + (x as f64 - self.target.0) * est / d;
        let oy = self.target.1 + (y as f64 - self.target.1) * est / d;
        (ox.clamp(0.0, hi), oy.clamp(0.0, hi))
    }

    fn bucket(&self, v: f64) -> usize {
        let width = self.grid_size as f64 / self.buckets as f64;
        ((v / width).floor() as usize).min(self.buckets - 1)
    }

    pub fn enter(&self, x: usize, y: usize, rng: &mut dyn RngCore) -> LocalizationState {
        LocalizationState {
            x,
            y,
            observed: self.observe(x, y, rng),
        }
    }
}

impl Mdp for LocalizationEnv {
    type State = LocalizationState;

    fn num_actions(&self) -> usize {
        MOVES.len()
    }

    /// One-hot over (position bucket, action).
    fn feature_dim(&self) -> usize {
        self.buckets * self.buckets * MOVES.len()
    }

    fn features(&self, state: &LocalizationState, action: usize, out: &mut [f64]) {
        out.fill(0.0);
        let cell = self.bucket(state.observed.0) * self.buckets + self.bucket(state.observed.1);
        out[cell * MOVES.len() + action] = self.feature_scale;
    }

    fn initial_state(&self, rng: &mut dyn RngCore) -> LocalizationState {
        let x = rng.random_range(self.start.x0..=self.start.x1);
        let y = rng.random_range(self.start.y0..=self.start.y1);
        self.enter(x, y, rng)
    }

    fn step(
        &self,
        state: &LocalizationState,
        action: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(LocalizationState, f64)> {
        let (dx, dy) = *MOVES
            .get(action)
            .ok_or_else(|| Error::InvalidEnvironment(format!("action {action} out of range")))?;
        let hi = self.grid_size as i64 - 1;
        let x = (state.x as i64 + dx).clamp(0, hi) as usize;
        let y = (state.y as i64 + dy).clamp(0, hi) as usize;
        let loss = -self.reward_at(x, y);
        Ok((self.enter(x, y, rng), loss))
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn discount(&self) -> f64 {
        self.discount
    }

    fn state_label(&self, state: &LocalizationState) -> String {
        format!("{}:{}", state.x, state.y)
    }
}
