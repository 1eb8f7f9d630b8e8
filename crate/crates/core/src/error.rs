use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("expected a unit-norm state, got norm {norm}")]
    NotNormalized { norm: f64 },

    #[error("control vector has length {got}, model expects {expected}")]
    ControlLength { expected: usize, got: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("trajectory from node {node} left the computational box")]
    OutOfBox { node: usize },

    #[error("jacobian determinant is not positive at node {node} (value {value})")]
    NonPositiveJacobian { node: usize, value: f64 },

    #[error("density is not strictly positive at node {node}")]
    NonPositiveDensity { node: usize },

    #[error("monotone inversion failed to converge for target {target}")]
    InversionFailed { target: f64 },

    #[error("densities differ outside the inner box by {max_diff:e}")]
    DensityMismatchOutsideBox { max_diff: f64 },

    #[error("schedule needs total time {attempted}, budget is {budget}")]
    BudgetExceeded { attempted: f64, budget: f64 },

    #[error("target phase is not representable at depth {depth} (residual {residual:e})")]
    NotRepresentable { depth: usize, residual: f64 },

    #[error("vector field `{0}` cannot be realized by the available generators")]
    UnrealizableField(String),

    #[error("support safety violated: {0}")]
    SupportViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
