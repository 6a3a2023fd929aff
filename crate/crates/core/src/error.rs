use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A posterior was requested for an action row that carries no mass.
    #[error("row {row} has zero mass, its posterior is undefined")]
    ZeroMassRow { row: usize },

    /// The exponential kernel underflowed; use the log-domain solver.
    #[error("kernel {what} {index} underflows to zero; use the log-domain solver")]
    NumericalUnderflow { what: &'static str, index: usize },

    #[error("cost oracle does not provide gradients")]
    NonDifferentiableCost,

    #[error("backward pass requires a scalar output, got a {rows}x{cols} node")]
    NonScalarOutput { rows: usize, cols: usize },

    #[error("box coordinate {coord} is degenerate (a = b = {value})")]
    DegenerateBox { coord: usize, value: f64 },

    #[error("unknown divergence {0:?}")]
    UnknownDivergence(String),

    #[error("divergence {0:?} has no differentiable expression")]
    NotTapeable(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
