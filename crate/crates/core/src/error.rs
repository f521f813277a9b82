use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible degree profile: {0}")]
    InfeasibleProfile(String),

    #[error("no threshold crossing of Pe = {epsilon} in [{lo}, {hi}]")]
    NoCrossing { lo: f64, hi: f64, epsilon: f64 },

    #[error("no grid tuple reached Pe < {epsilon}")]
    NoConvergence { epsilon: f64 },

    #[error("alist parse error at line {line}: {msg}")]
    Alist { line: usize, msg: String },

    #[error("generator cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
