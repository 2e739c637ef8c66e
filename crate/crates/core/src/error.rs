use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("state {0} out of range")]
    StateOutOfRange(usize),
    #[error("action {action} out of range for state {state}")]
    ActionOutOfRange { state: usize, action: usize },
    #[error("unknown reward structure `{0}`")]
    UnknownReward(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("degenerate preference: {0}")]
    DegeneratePreference(String),
    #[error("invalid preference input: {0}")]
    InvalidPreference(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("infeasible preference interval")]
    InfeasibleInterval,
    #[error("weight vector not on the simplex: {0}")]
    NotOnSimplex(String),
    #[error("instance too large for exhaustive enumeration ({count} > {limit})")]
    TooLarge { count: f64, limit: u64 },
    #[error("multi-strategy blocks at reachable state {0} (no allowed action)")]
    BlockedState(usize),
    #[error("malformed solution: {0}")]
    MalformedSolution(String),
    #[error("milp: {0}")]
    Milp(String),
    #[error("encoding: {0}")]
    Encoding(String),
    #[error("no sound multi-strategy exists for the given bounds")]
    NoSoundMultiStrategy,
    #[error("synthesis: {0}")]
    Synthesis(String),
    #[error("grid: {0}")]
    Grid(String),
}
