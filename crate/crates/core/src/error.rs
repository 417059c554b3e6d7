use std::path::PathBuf;

use thiserror::Error;

use crate::linalg::SolveReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("mesh topology error: {0}")]
    Topology(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unsupported polynomial degree {0} (supported: 1..=4)")]
    UnsupportedDegree(usize),

    #[error("no {kind} quadrature rule of degree {degree} (maximum {max})")]
    QuadratureDegree {
        kind: &'static str,
        degree: usize,
        max: usize,
    },

    #[error("degenerate triangle {element}: signed area {area:e}")]
    Degenerate { element: usize, area: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("element {element}: local block is singular (pivot ratio {pivot_ratio:e}); the stabilization may be below the stability threshold")]
    SingularLocalBlock { element: usize, pivot_ratio: f64 },

    #[error("linear solver failed: {reason}")]
    Solver {
        reason: String,
        report: Box<SolveReport>,
    },

    #[error("check failed: {0}")]
    Check(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit status for the command line tool: 2 for bad input or
    /// configuration, 3 for solver failures, 4 for failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Solver { .. } | Error::SingularLocalBlock { .. } => 3,
            Error::Check(_) => 4,
            _ => 2,
        }
    }
}
