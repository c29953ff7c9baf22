use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("link ground segment does not intersect the grid")]
    EmptyTrace,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("repeated erfc integral order {order} exceeds cap {cap}; use a higher-precision backend for this argument")]
    OrderCap { order: usize, cap: usize },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("fit diverged at epoch {epoch}: loss {loss} (best {best})")]
    Diverged { epoch: usize, loss: f64, best: f64 },
    #[error("no feasible relay position: {0}")]
    Infeasible(String),
}
