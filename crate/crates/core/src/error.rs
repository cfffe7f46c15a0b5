use std::path::PathBuf;

use crate::solver::Trajectory;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("active cells are not 4-connected: cell (row {row}, col {col}) is cut off from cell (row {from_row}, col {from_col})")]
    DisconnectedMask {
        row: usize,
        col: usize,
        from_row: usize,
        from_col: usize,
    },

    #[error("invalid city set: {0}")]
    InvalidCities(String),

    #[error("city {id:?} sits on an inactive (NODATA) cell at row {row}, col {col}")]
    CityOnInactiveCell { id: String, row: usize, col: usize },

    #[error("city {id:?} at row {row}, col {col} lies outside the {n_rows}x{n_cols} grid")]
    CityOffGrid {
        id: String,
        row: usize,
        col: usize,
        n_rows: usize,
        n_cols: usize,
    },

    #[error("active cell (row {row}, col {col}) is unreachable from city {city}")]
    UnreachableCell { city: usize, row: usize, col: usize },

    #[error("length mismatch: {what} has {got} entries, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        got: usize,
        expected: usize,
    },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("price {index} is not strictly positive ({value})")]
    NonPositivePrice { index: usize, value: f64 },

    #[error("value {value} lies outside the range of the price transform for alpha = {alpha}")]
    OutsideTransformRange { value: f64, alpha: f64 },

    #[error("fixed step drove price {index} to {value}; use a smaller step")]
    StepLeftPositiveOrthant { index: usize, value: f64 },

    #[error("line search failed at iteration {iteration} (gradient inf-norm {grad_inf_norm:e})")]
    LineSearchFailed {
        iteration: usize,
        grad_inf_norm: f64,
        trajectory: Box<Trajectory>,
    },

    #[error("no convergence after {iterations} iterations (gradient inf-norm {grad_inf_norm:e}, tol {tol:e})")]
    NotConverged {
        iterations: usize,
        grad_inf_norm: f64,
        tol: f64,
        prices: Vec<f64>,
        trajectory: Box<Trajectory>,
    },

    #[error("equilibrium verification failed: {}", .0.join("; "))]
    VerificationFailed(Vec<String>),

    #[error("partitions are not comparable: {0}")]
    IncomparablePartitions(String),

    #[error("skeleton is empty (a single-region partition has no borders)")]
    EmptySkeleton,

    #[error("singular Jacobian")]
    SingularJacobian,

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}, line {line}: {message}")]
    ParseLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
