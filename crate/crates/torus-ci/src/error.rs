use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid size {0}: need even N >= 4")]
    InvalidGrid(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grids differ: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("time {t} outside series range [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("input not divergence-free (|div| = {0:e})")]
    NotDivergenceFree(f64),
    #[error("tensor argument has nonzero mean ({0:e})")]
    NonZeroMean(f64),
    #[error("aliasing: {0}")]
    Aliasing(String),
    #[error("amplitude domain guard violated: |R/rho| = {0}")]
    DomainGuard(f64),
    #[error("fixed point did not converge after {iterations} iterations (last increment {increment:e}, ratio {ratio})")]
    NonConvergence { iterations: usize, increment: f64, ratio: f64 },
    #[error("numeric failure in {0}")]
    Numeric(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
