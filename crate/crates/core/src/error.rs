use thiserror::Error;

pub type Result<T, E = FplError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum FplError {
    #[error("expert pool must contain at least one expert")]
    EmptyPool,

    #[error("complexity k[{index}] = {value} must be finite and nonnegative")]
    InvalidComplexity { index: usize, value: f64 },

    #[error("complexities are not valid code lengths: sum of exp(-k) = {0} exceeds 1")]
    KraftViolation(f64),

    #[error("entering time of expert {index} must be at least 1")]
    InvalidEnteringTime { index: usize },

    #[error("dimension mismatch: expected {expected} experts, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("loss of expert {index} is {value}, outside [0, 1]")]
    LossOutOfRange { index: usize, value: f64 },

    #[error("no rounds have been played")]
    EmptyHistory,

    #[error("no active experts at round {0}")]
    NoActiveExperts(usize),

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("schedule observable `{0}` decreased between rounds")]
    ObservableDecreased(&'static str),

    #[error("learning rate increased from {previous} to {next}")]
    RateIncreased { previous: f64, next: f64 },

    #[error("exact subset sum supports at most {cap} experts, got {n}")]
    SubsetCapExceeded { n: usize, cap: usize },

    #[error("quadrature did not converge with {nodes} nodes (last change {change:e})")]
    QuadratureNonConvergence { nodes: usize, change: f64 },

    #[error("quadrature probabilities sum to {0}, deviation from 1 exceeds 1e-7")]
    NormalizationDefect(f64),

    #[error("decision history has length {got}, expected {expected}")]
    HistoryLength { expected: usize, got: usize },

    #[error("fixed loss sequence has {available} rounds, round {requested} requested")]
    HorizonExceeded { requested: usize, available: usize },

    #[error("observe() called without a preceding decide()")]
    NoPendingDecision,

    #[error("{0} is not supported")]
    Unsupported(String),

    #[error("hypothesis of `{bound}` not satisfied: {reason}")]
    Hypothesis { bound: String, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FplError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        FplError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
