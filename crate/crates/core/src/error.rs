use thiserror::Error;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid model spec: {0}")]
    InvalidSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different grids: {0}")]
    GridMismatch(String),

    #[error("non-finite value {value} at node {index} ({coords:?})")]
    NonFinite {
        index: usize,
        coords: [f64; 2],
        value: f64,
    },

    #[error("potential must be nonnegative; found {value} at node {index}")]
    NegativePotential { index: usize, value: f64 },

    #[error("matrix is singular: zero pivot in column {column}")]
    SingularMatrix { column: usize },

    #[error("shift {lambda} sits on an eigenvalue (pivot ratio {pivot_ratio:.3e}); resolvent undefined")]
    ShiftOnEigenvalue { lambda: f64, pivot_ratio: f64 },

    #[error("linear solve residual {residual:.3e} exceeds tolerance {tol:.3e}")]
    SolverBreakdown { residual: f64, tol: f64 },

    #[error("time grid cannot control the tail: {0}")]
    TailUncontrolled(String),

    #[error("eigenpair search failed: {0}")]
    EigenSearch(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("file format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
