//! Decentralized consensus optimization with token-passing incremental ADMM.

pub mod admm;
pub mod baselines;
pub mod config;
pub mod error;
pub mod graph;
pub mod linalg;
pub mod method;
pub mod metrics;
pub mod objective;
pub mod problems;
pub mod rl;
pub mod rng;
pub mod runner;
pub mod selftest;
pub mod svg;

pub use error::{Error, Result};
