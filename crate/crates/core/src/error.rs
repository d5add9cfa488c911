use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("requested dimension {requested} exceeds capacity {max}")]
    Capacity { requested: usize, max: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("eigendecomposition did not converge after {sweeps} sweeps (off-diagonal norm {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("state has zero norm")]
    DegenerateState,

    #[error("post-selection impossible: probability {probability:e} is below {threshold:e}")]
    PostSelectionImpossible { probability: f64, threshold: f64 },

    #[error("conditional probability undefined: denominator {denominator:e}")]
    UndefinedConditional { denominator: f64 },

    #[error("observable has a degenerate spectrum; use the projector-set interface")]
    DegenerateObservable,

    #[error("filter accepted {accepted} of {samples} samples (need at least {required})")]
    EmptyFilter {
        accepted: usize,
        samples: usize,
        required: usize,
    },

    #[error("ratio undefined at a node: density {density:e} relative to peak")]
    UndefinedRatio { density: f64 },

    #[error("outcome index {index} out of range for {count} outcomes")]
    OutcomeIndex { index: usize, count: usize },
}
