//! Crate-wide error type.
//!
//! Errors are split into two families that matter for the CLI exit code:
//! input problems (bad files, schema mismatches, bad configuration) and
//! numerical problems (calibration, separation, degenerate outcomes).

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("input error: {0}")]
    Input(String),

    #[error("outcome coding error: unknown wellbeing level {0:?}")]
    Coding(String),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("df calibration error: {0}")]
    Calibration(String),

    #[error("linear algebra error: {0}")]
    LinearAlgebra(String),

    #[error("degenerate outcome: {0}")]
    Degenerate(String),

    #[error("complete separation detected: {0}")]
    Separation(String),

    #[error("singular information matrix: {0}")]
    Rank(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("metric error: {0}")]
    Metric(String),
}

impl Error {
    /// Exit code for the CLI: 1 for input/schema/config problems,
    /// 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_)
            | Error::Csv(_)
            | Error::Config(_)
            | Error::Schema(_)
            | Error::Input(_)
            | Error::Coding(_)
            | Error::Encoding(_)
            | Error::Lookup(_) => 1,
            Error::Calibration(_)
            | Error::LinearAlgebra(_)
            | Error::Degenerate(_)
            | Error::Separation(_)
            | Error::Rank(_)
            | Error::Divergence(_)
            | Error::Metric(_) => 2,
        }
    }
}
