use thiserror::Error;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("capacity exceeded: {what} needs {cells} cells, desk-scale cap is {cap}")]
    Capacity {
        what: String,
        cells: usize,
        cap: usize,
    },

    #[error("singular coefficient `{block}`{}", location(*.cell))]
    SingularCoefficient { block: String, cell: Option<usize> },

    #[error("pivot block {0} is singular")]
    PivotSingular(usize),

    #[error("`{block}` is not positive definite{} (min eigenvalue {min_eig:e})", location(*.cell))]
    NotPositiveDefinite {
        block: String,
        cell: Option<usize>,
        min_eig: f64,
    },

    #[error("degenerate grid: {0}")]
    DegenerateGrid(String),

    #[error("linear solve failed: relative residual {residual:e} after {iterations} iterations")]
    SolverFailure { residual: f64, iterations: usize },
}

fn location(cell: Option<usize>) -> String {
    match cell {
        Some(c) => format!(" at cell {c}"),
        None => " (nonlocal block)".to_string(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
