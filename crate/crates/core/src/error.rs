use thiserror::Error;

/// Errors raised by the pricing engine.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// Malformed or inconsistent input (unknown buyer, bad bundle, out-of-range parameter).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An operation was called with arguments violating its precondition,
    /// e.g. Vickrey prices for a coalition that is not efficient.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An enumeration exceeded its configured cap.
    #[error("resource limit exceeded: {what} ({count} > {limit})")]
    ResourceLimit {
        what: &'static str,
        count: usize,
        limit: usize,
    },

    /// An iterative solver gave up. Carries the best iterate and its residual.
    #[error("numerical failure: {message} (residual {residual:.3e})")]
    NumericalFailure {
        message: String,
        best: Vec<f64>,
        residual: f64,
    },

    /// Evaluation requested at (or numerically too close to) a point where the
    /// requested one-sided quantity is not given by the smooth formula.
    #[error("theta = {theta} is at a breakpoint or exceptional point: {reason}")]
    BoundaryPoint { theta: f64, reason: String },

    /// The winner set changed inside a sweep range.
    #[error("winner set changes inside the sweep range near bid {crossing_bid}")]
    RangeInvalid { crossing_bid: String },

    /// A generated scenario did not produce the winners it was constructed for.
    #[error("construction error: {0}")]
    Construction(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
