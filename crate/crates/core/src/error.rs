use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid operator: {0}")]
    InvalidOperator(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("target level {k_diamond} is too high: it must satisfy k_diamond <= {max_allowed}")]
    LevelMismatch { k_diamond: i64, max_allowed: i64 },

    #[error("truncation {n_cols} is too small: at least {min} columns are needed for bandwidth {bandwidth}")]
    Truncation {
        n_cols: usize,
        min: usize,
        bandwidth: usize,
    },

    #[error("entry ({row}, {col}) lies outside the declared bandwidth {bandwidth}")]
    BandViolation {
        row: usize,
        col: usize,
        bandwidth: usize,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("linear algebra failure: {0}")]
    Solver(String),

    #[error("alignment failed: {0}")]
    Alignment(String),

    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
