use std::path::PathBuf;

use thiserror::Error;

use crate::ode::OdeError;

#[derive(Debug, Error)]
pub enum Error {
    #[error("poisoned state: non-finite value at grid index {index} (t = {t})")]
    PoisonedState { t: f64, index: usize },

    #[error("dimension mismatch: grid has {expected} points, field has {got}")]
    Dimension { expected: usize, got: usize },

    #[error(
        "Crank-Nicolson iteration did not converge at t = {t}: residual {residual:e} after {iterations} iterations"
    )]
    StepDivergence {
        t: f64,
        residual: f64,
        iterations: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("self-similar branch n = {n} not found with slope parameter b <= {b_max:e}")]
    BranchNotFound { n: usize, b_max: f64 },

    #[error("ambiguous crossing of pi/2 near z = {z}")]
    AmbiguousCrossing { z: f64 },

    #[error("eigenvalue scan unresolved at step {step:e}: root count still changing")]
    ScanUnresolved { step: f64 },

    #[error("root at the boundary of the search range ({value}); widen the range")]
    RootAtRangeBoundary { value: f64 },

    #[error("static solution blew up at r = {r}")]
    StaticBlowUp { r: f64 },

    #[error("convergence order undefined: {0}")]
    OrderUndefined(String),

    #[error("invalid bisection bracket: {0}")]
    InvalidBracket(String),

    #[error("collapse time estimation failed: {0}")]
    CollapseTime(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing upstream result {what}; run `wavemap {command}` first")]
    MissingDependency { what: String, command: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Ode(#[from] OdeError),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
