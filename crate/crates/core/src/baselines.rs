//! Reference optimizers: DGD, EXTRA and incremental gradient descent.

use std::sync::Arc;

use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{metropolis_weights, MixingMatrix, NetworkGraph};
use crate::linalg::{axpy, check_dim, mean_vector};
use crate::method::DecentralizedMethod;
use crate::objective::{GradientSample, Objective};
use crate::rng::{self, Purpose};

/// Where baseline methods take their local gradients from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientSource {
    /// Exact `∇f_i`.
    Full,
    /// Mini-batch estimate of the given size.
    MiniBatch(usize),
}

fn local_gradient(
    obj: &dyn Objective,
    theta: &[f64],
    source: GradientSource,
    rng: &mut ChaCha8Rng,
) -> Result<GradientSample> {
    match source {
        GradientSource::Full => {
            let gradient = obj
                .full_gradient(theta)
                .ok_or(Error::NotAvailable("exact local gradient"))?;
            Ok(GradientSample {
                gradient,
                samples: obj.dataset_size().unwrap_or(1),
                mean_return: None,
            })
        }
        GradientSource::MiniBatch(m) => obj.stochastic_gradient(theta, m, rng),
    }
}

/// Synchronous gossip state.
#[derive(Debug, Clone)]
pub struct GossipState {
    pub thetas: Vec<Vec<f64>>,
    pub mixing: MixingMatrix,
    pub step_size: f64,
}

impl GossipState {
    pub fn new(thetas: Vec<Vec<f64>>, mixing: MixingMatrix, step_size: f64) -> Result<Self> {
        check_dim(mixing.size(), thetas.len())?;
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidHyperParam {
                name: "step_size",
                reason: "must be positive and finite".into(),
            });
        }
        Ok(GossipState {
            thetas,
            mixing,
            step_size,
        })
    }
}

fn mix(w: &MixingMatrix, thetas: &[Vec<f64>], i: usize) -> Vec<f64> {
    let mut out = vec![0.0; thetas[i].len()];
    for (j, t) in thetas.iter().enumerate() {
        let wij = w.get(i, j);
        if wij != 0.0 {
            axpy(wij, t, &mut out);
        }
    }
    out
}

/// `θ_i ← Σ_j W_ij θ_j − α g_i` for every agent at once.
pub fn dgd_round(state: &GossipState, grads: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    check_dim(state.thetas.len(), grads.len())?;
    (0..state.thetas.len())
        .map(|i| {
            check_dim(state.thetas[i].len(), grads[i].len())?;
            let mut next = mix(&state.mixing, &state.thetas, i);
            axpy(-state.step_size, &grads[i], &mut next);
            Ok(next)
        })
        .collect()
}

/// EXTRA recursion with `W̃ = (I + W)/2`:
/// `θ^{k+2} = (I+W)θ^{k+1} − W̃θ^k − α(∇f(θ^{k+1}) − ∇f(θ^k))`.
pub fn extra_round(
    current: &GossipState,
    previous: &[Vec<f64>],
    grads_current: &[Vec<f64>],
    grads_previous: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let n = current.thetas.len();
    for v in [previous, grads_current, grads_previous] {
        check_dim(n, v.len())?;
    }
    let w = &current.mixing;
    (0..n)
        .map(|i| {
            let m = current.thetas[i].len();
            let mixed_cur = mix(w, &current.thetas, i);
            let mixed_prev = mix(w, previous, i);
            Ok((0..m)
                .map(|d| {
                    let a = current.thetas[i][d] + mixed_cur[d];
                    let b = 0.5 * (previous[i][d] + mixed_prev[d]);
                    a - b - current.step_size * (grads_current[i][d] - grads_previous[i][d])
                })
                .collect())
        })
        .collect()
}

/// `θ − γ g`
pub fn igd_step(theta: &[f64], grad: &[f64], step: f64) -> Result<Vec<f64>> {
    check_dim(theta.len(), grad.len())?;
    Ok(theta.iter().zip(grad).map(|(t, g)| t - step * g).collect())
}

struct Agents {
    objectives: Vec<Arc<dyn Objective>>,
    rngs: Vec<ChaCha8Rng>,
    source: GradientSource,
    latest_returns: Vec<Option<f64>>,
}

impl Agents {
    fn new(objectives: Vec<Arc<dyn Objective>>, source: GradientSource, seed: u64) -> Result<Self> {
        let n = objectives.len();
        if n == 0 {
            return Err(Error::InvalidSize { n });
        }
        let m = objectives[0].dim();
        for o in &objectives {
            check_dim(m, o.dim())?;
        }
        Ok(Agents {
            rngs: (0..n)
                .map(|i| rng::stream(seed, Purpose::Sampling, i as u64))
                .collect(),
            objectives,
            source,
            latest_returns: vec![None; n],
        })
    }

    fn dim(&self) -> usize {
        self.objectives[0].dim()
    }

    fn gradient(&mut self, agent: usize, theta: &[f64]) -> Result<Vec<f64>> {
        let s = local_gradient(
            self.objectives[agent].as_ref(),
            theta,
            self.source,
            &mut self.rngs[agent],
        )?;
        if s.mean_return.is_some() {
            self.latest_returns[agent] = s.mean_return;
        }
        Ok(s.gradient)
    }

    fn gradients(&mut self, thetas: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        (0..thetas.len())
            .map(|i| self.gradient(i, &thetas[i]))
            .collect()
    }
}

/// Decentralized gradient descent with Metropolis mixing.
pub struct Dgd {
    state: GossipState,
    agents: Agents,
    scalars_per_round: u64,
    k: u64,
    comm: u64,
}

impl Dgd {
    pub fn new(
        graph: &NetworkGraph,
        objectives: Vec<Arc<dyn Objective>>,
        step_size: f64,
        source: GradientSource,
        seed: u64,
    ) -> Result<Self> {
        check_dim(graph.agent_count(), objectives.len())?;
        let agents = Agents::new(objectives, source, seed)?;
        let m = agents.dim();
        let state = GossipState::new(
            vec![vec![0.0; m]; graph.agent_count()],
            metropolis_weights(graph),
            step_size,
        )?;
        Ok(Dgd {
            state,
            agents,
            scalars_per_round: 2 * graph.edge_count() as u64 * m as u64,
            k: 0,
            comm: 0,
        })
    }
}

impl DecentralizedMethod for Dgd {
    fn label(&self) -> &'static str {
        "dgd"
    }

    fn step(&mut self) -> Result<()> {
        let grads = self.agents.gradients(&self.state.thetas)?;
        self.state.thetas = dgd_round(&self.state, &grads)?;
        self.k += 1;
        self.comm += self.scalars_per_round;
        Ok(())
    }

    fn iteration(&self) -> u64 {
        self.k
    }

    fn comm_scalars(&self) -> u64 {
        self.comm
    }

    fn agent_count(&self) -> usize {
        self.state.thetas.len()
    }

    fn theta(&self, agent: usize) -> &[f64] {
        &self.state.thetas[agent]
    }

    fn consensus_parameter(&self) -> Vec<f64> {
        mean_vector(&self.state.thetas)
    }

    fn latest_returns(&self) -> &[Option<f64>] {
        &self.agents.latest_returns
    }
}

/// EXTRA; its first round is a plain DGD step.
/// Iterates and gradients of the previous round.
type PreviousRound = (Vec<Vec<f64>>, Vec<Vec<f64>>);

pub struct Extra {
    state: GossipState,
    previous: Option<PreviousRound>,
    agents: Agents,
    scalars_per_round: u64,
    k: u64,
    comm: u64,
}

impl Extra {
    pub fn new(
        graph: &NetworkGraph,
        objectives: Vec<Arc<dyn Objective>>,
        step_size: f64,
        source: GradientSource,
        seed: u64,
    ) -> Result<Self> {
        check_dim(graph.agent_count(), objectives.len())?;
        let agents = Agents::new(objectives, source, seed)?;
        let m = agents.dim();
        let state = GossipState::new(
            vec![vec![0.0; m]; graph.agent_count()],
            metropolis_weights(graph),
            step_size,
        )?;
        Ok(Extra {
            state,
            previous: None,
            agents,
            scalars_per_round: 2 * graph.edge_count() as u64 * m as u64,
            k: 0,
            comm: 0,
        })
    }
}

impl DecentralizedMethod for Extra {
    fn label(&self) -> &'static str {
        "extra"
    }

    fn step(&mut self) -> Result<()> {
        let grads = self.agents.gradients(&self.state.thetas)?;
        let next = match &self.previous {
            None => dgd_round(&self.state, &grads)?,
            Some((prev_thetas, prev_grads)) => {
                extra_round(&self.state, prev_thetas, &grads, prev_grads)?
            }
        };
        let current = std::mem::replace(&mut self.state.thetas, next);
        self.previous = Some((current, grads));
        self.k += 1;
        self.comm += self.scalars_per_round;
        Ok(())
    }

    fn iteration(&self) -> u64 {
        self.k
    }

    fn comm_scalars(&self) -> u64 {
        self.comm
    }

    fn agent_count(&self) -> usize {
        self.state.thetas.len()
    }

    fn theta(&self, agent: usize) -> &[f64] {
        &self.state.thetas[agent]
    }

    fn consensus_parameter(&self) -> Vec<f64> {
        mean_vector(&self.state.thetas)
    }

    fn latest_returns(&self) -> &[Option<f64>] {
        &self.agents.latest_returns
    }
}

/// Incremental gradient descent: a single iterate walks the cycle and each
/// agent applies one local gradient step. Each agent's reported parameter is
/// the iterate it last forwarded.
pub struct Igd {
    cycle: Vec<usize>,
    token: Vec<f64>,
    held: Vec<Vec<f64>>,
    step_size: f64,
    agents: Agents,
    k: u64,
    comm: u64,
}

impl Igd {
    pub fn new(
        graph: &NetworkGraph,
        objectives: Vec<Arc<dyn Objective>>,
        step_size: f64,
        source: GradientSource,
        seed: u64,
    ) -> Result<Self> {
        check_dim(graph.agent_count(), objectives.len())?;
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidHyperParam {
                name: "step_size",
                reason: "must be positive and finite".into(),
            });
        }
        let agents = Agents::new(objectives, source, seed)?;
        let m = agents.dim();
        Ok(Igd {
            cycle: graph.cycle().to_vec(),
            token: vec![0.0; m],
            held: vec![vec![0.0; m]; graph.agent_count()],
            step_size,
            agents,
            k: 0,
            comm: 0,
        })
    }

    pub fn iterate(&self) -> &[f64] {
        &self.token
    }
}

impl DecentralizedMethod for Igd {
    fn label(&self) -> &'static str {
        "igd"
    }

    fn step(&mut self) -> Result<()> {
        let agent = self.cycle[(self.k % self.cycle.len() as u64) as usize];
        let g = self.agents.gradient(agent, &self.token)?;
        self.token = igd_step(&self.token, &g, self.step_size)?;
        self.held[agent].clone_from(&self.token);
        self.k += 1;
        self.comm += self.token.len() as u64;
        Ok(())
    }

    fn iteration(&self) -> u64 {
        self.k
    }

    fn comm_scalars(&self) -> u64 {
        self.comm
    }

    fn agent_count(&self) -> usize {
        self.held.len()
    }

    fn theta(&self, agent: usize) -> &[f64] {
        &self.held[agent]
    }

    fn consensus_parameter(&self) -> Vec<f64> {
        self.token.clone()
    }

    fn latest_returns(&self) -> &[Option<f64>] {
        &self.agents.latest_returns
    }
}
