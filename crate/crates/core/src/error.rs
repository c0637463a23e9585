use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("disturbance norm {norm} exceeds bound {bound}")]
    InvalidDisturbance { norm: f64, bound: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// Malformed document. `line` is 1-based (for CSV it is the file line of the row).
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("gradient of constraint '{0}' is singular at this state")]
    SingularGradient(String),

    #[error(
        "constraint '{0}' is structurally infeasible: no control authority and a positive demand"
    )]
    StructurallyInfeasible(String),

    #[error("active-set solver exceeded {0} working-set changes")]
    SolverStall(usize),

    #[error("trace has no steps")]
    EmptyTrace,

    #[error("invalid ledger: {0}")]
    InvalidLedger(String),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
