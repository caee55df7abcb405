use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid triad {0:?}: {1}")]
    InvalidTriad(Vec<usize>, &'static str),
    #[error("duplicate triad {0:?}")]
    DuplicateTriad([usize; 3]),
    #[error("triad {0:?} is not active")]
    InactiveTriad([usize; 3]),
    #[error("agent index {0} out of range (n = {1})")]
    AgentOutOfRange(usize, usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("explicit step unstable: dt * rate * lambda_max = {0:.4} >= 2")]
    StepSize(f64),
    #[error("state space too large: {0} states")]
    StateSpace(u128),
    #[error("reducible chain: {0}")]
    Reducible(String),
    #[error("{0}")]
    Refused(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
