//! Common surface of every decentralized optimizer, so that metrics and
//! experiment drivers treat token-passing and gossip methods alike.

use crate::error::Result;

/// Dual state needed to evaluate the augmented Lagrangian.
pub struct LagrangianView<'a> {
    pub lambdas: Vec<&'a [f64]>,
    pub z: &'a [f64],
    pub rho: f64,
}

pub trait DecentralizedMethod: Send {
    fn label(&self) -> &'static str;

    /// One iteration: a single token visit for incremental methods, one
    /// synchronous round for gossip methods.
    fn step(&mut self) -> Result<()>;

    /// Iterations completed so far.
    fn iteration(&self) -> u64;

    /// Cumulative number of real scalars transmitted over all links.
    fn comm_scalars(&self) -> u64;

    fn agent_count(&self) -> usize;

    fn theta(&self, agent: usize) -> &[f64];

    fn thetas(&self) -> Vec<&[f64]> {
        (0..self.agent_count()).map(|i| self.theta(i)).collect()
    }

    /// The parameter the network would deploy: the token for incremental
    /// methods, the agents' average for gossip methods.
    fn consensus_parameter(&self) -> Vec<f64>;

    /// Most recent mean episode reward observed by each agent.
    fn latest_returns(&self) -> &[Option<f64>];

    fn lagrangian(&self) -> Option<LagrangianView<'_>> {
        None
    }
}
