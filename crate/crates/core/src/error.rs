//! Error type shared by every module of the library.

use thiserror::Error;

/// Errors raised by table construction, solvers and file parsing.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("convexity violated at angle {theta}: radius of curvature {radius}")]
    Convexity { theta: f64, radius: f64 },
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("horizon violation: {0}")]
    HorizonViolation(String),
    #[error("degenerate segment: endpoints coincide")]
    DegenerateSegment,
    #[error("invalid word: {0}")]
    InvalidWord(String),
    #[error("solver failure: {message} (best residual {best_residual:e})")]
    SolverFailure { message: String, best_residual: f64 },
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),
    #[error("point outside the feasible box: {0}")]
    InfeasiblePoint(String),
    #[error("infeasible word: {0}")]
    InfeasibleWord(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("perturbation too large: {0}")]
    PerturbationTooLarge(String),
    #[error("singular Hessian: {0}")]
    HessianSingular(String),
    #[error("initial condition not in the regular set: {0}")]
    NotInA0(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("integration failure after time {reach}: {message}")]
    IntegrationFailure { reach: f64, message: String },
    #[error("curve left its homotopy class: {0}")]
    ClassEscape(String),
    #[error("incomparable tables: {0}")]
    IncomparableTables(String),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
