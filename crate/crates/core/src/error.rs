use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("graph has {n} vertices, above the simulator limit of {limit}")]
    Capacity { n: usize, limit: usize },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("edge ({0}, {1}) is not in the graph")]
    EdgeNotFound(usize, usize),

    #[error("invalid edge ({0}, {1}): {2}")]
    InvalidEdge(usize, usize, &'static str),

    #[error("could not generate a connected graph; last seed tried was {last_seed}")]
    GenerationFailed { last_seed: u64 },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("budget of {budget} evaluations is too small; at least {required} are needed")]
    BudgetTooSmall { budget: usize, required: usize },

    #[error("approximation ratio undefined for best value {0} (must be negative)")]
    UndefinedRatio(f64),

    #[error("objective evaluation failed: {0}")]
    Objective(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
