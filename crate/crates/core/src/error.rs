use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not square: {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix has a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("not stochastic: {0}")]
    NotStochastic(String),

    #[error("chain is not irreducible")]
    NotIrreducible,

    #[error("invariant measure is not unique ({0} closed classes)")]
    MultipleInvariantMeasures(usize),

    #[error("chain is not reversible with respect to its stationary distribution")]
    NotReversible,

    #[error("chain is not normal with respect to its stationary distribution")]
    NotNormal,

    #[error("second-smallest singular value is numerically zero; relaxation time is infinite")]
    DegenerateKernel,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("test function is not mean-zero with unit norm: {0}")]
    BadTestFunction(String),

    #[error("{states} states exceeds the enumeration limit of {limit}")]
    TooLargeForEnumeration { states: usize, limit: usize },

    #[error("no directed path from state {from} to state {to}")]
    NoPathExists { from: usize, to: usize },

    #[error("invalid path ensemble: {0}")]
    InvalidPaths(String),

    #[error("aperiodic chain did not mix to within {eps} after {cap} steps")]
    MixingCapExceeded { eps: f64, cap: u64 },

    #[error("invalid step set: {0}")]
    InvalidSteps(String),

    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),

    #[error("chain would have {states} states, above the limit of {limit}")]
    TooLarge { states: usize, limit: usize },

    #[error("{0} is not prime")]
    NotPrime(u64),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("bad probability literal {0:?}")]
    BadLiteral(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
