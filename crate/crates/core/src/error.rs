use thiserror::Error;

/// Errors raised by the solvers, the oracle and the run orchestration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("configuration error: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("well-posedness gate failed for block {block}: |det| = {det:e} below tolerance {tolerance:e}")]
    WellPosedness { block: usize, det: f64, tolerance: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("value saturates double precision: {0}")]
    Saturation(String),

    #[error("quadrature did not reach requested accuracy: {0}")]
    Accuracy(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status for this failure class.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidGraph(_) => exit::CONFIG,
            Error::WellPosedness { .. } => exit::WELL_POSEDNESS,
            Error::Numerical(_) | Error::Domain(_) | Error::Saturation(_) | Error::Accuracy(_) => exit::NUMERICAL,
            Error::Io(_) => exit::IO,
        }
    }
}

/// Exit statuses shared by the library runner and the command line tool.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    /// A self-check failed.
    pub const CHECK_FAILED: i32 = 1;
    pub const CONFIG: i32 = 3;
    pub const WELL_POSEDNESS: i32 = 4;
    pub const NUMERICAL: i32 = 5;
    pub const IO: i32 = 6;
}
