use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("map is not expanding: lambda_min = {lambda_min} (must exceed 1)")]
    NotExpanding { lambda_min: f64 },

    #[error("perturbation must vanish at 0, got P(0) = {0}")]
    PerturbationNotPinned(f64),

    #[error("degree must be at least 2, got {0}")]
    BadDegree(u32),

    #[error("branch index {index} out of range for degree {degree}")]
    BranchOutOfRange { index: u32, degree: u32 },

    #[error("root finding did not converge: {0}")]
    NoConvergence(String),

    #[error("base/depth mismatch: ({0}, {1}) vs ({2}, {3})")]
    GroupMismatch(u32, usize, u32, usize),

    #[error("digit {digit} out of range for base {base}")]
    BadDigit { digit: u32, base: u32 },

    #[error("tolerance {tol:e} unreachable at word depth {depth}; need depth {needed}")]
    DepthInsufficient { tol: f64, depth: usize, needed: usize },

    #[error("index {m} exceeds digit depth {depth}")]
    IndexBeyondDepth { m: usize, depth: usize },

    #[error("word is zero at depth {0}")]
    ZeroWord(usize),

    #[error("no m_* within depth {0}")]
    NotWithinDepth(usize),

    #[error("|lambda| = {modulus} must be below lambda1 = {lambda1}")]
    LambdaTooLarge { modulus: f64, lambda1: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("epsilon {epsilon:e} must exceed the sub-action defect {defect:e}")]
    EpsilonBelowDefect { epsilon: f64, defect: f64 },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
