use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("no eigenprojection derivative required or defined for a triple eigenvalue")]
    TripleEigenvalue,

    #[error("plastic multiplier root not converged after {iterations} iterations on [{lo:e}, {hi:e}]")]
    RootNotConverged { lo: f64, hi: f64, iterations: usize },

    #[error("internal consistency violated: {0}")]
    Inconsistent(String),

    #[error("branch {branch} does not match the trial multiplicity {class}")]
    BranchMismatch { branch: String, class: String },

    #[error("element {element}, point {point}: {source}")]
    AtPoint {
        element: usize,
        point: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("singular control: |b.w| = {bw:e} below threshold {threshold:e}")]
    SingularControl { bw: f64, threshold: f64 },

    #[error("mesh: {0}")]
    Mesh(String),

    #[error("config {path}: {message}")]
    Config { path: String, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
