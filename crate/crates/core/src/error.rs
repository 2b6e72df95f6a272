use thiserror::Error;

/// Errors raised across the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid network size {n}: at least 2 agents are required")]
    InvalidSize { n: usize },

    #[error("invalid connectivity ratio {omega} for {n} agents: edge budget {budget} is below the ring minimum {minimum}")]
    InvalidRatio {
        n: usize,
        omega: f64,
        budget: usize,
        minimum: usize,
    },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid hyperparameter `{name}`: {reason}")]
    InvalidHyperParam { name: &'static str, reason: String },

    #[error("empty batch")]
    EmptyBatch,

    #[error(
        "degenerate initialization at agent {agent}: initial iterate coincides with the optimum"
    )]
    DegenerateInit { agent: usize },

    #[error("{0} is not available for this objective")]
    NotAvailable(&'static str),

    #[error("singular normal equations")]
    SingularSystem,

    #[error("trajectory was generated under a different policy parameter")]
    StaleTrajectory,

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("adaptive EMA weight bound violated at iteration {k}: {lhs} > {bound}")]
    EtaBoundViolated { k: u64, lhs: f64, bound: f64 },

    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("incompatible results: {0}")]
    Incompatible(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
