use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Structurally invalid input (bad lengths, unsorted grids, ...).
    #[error("validation error: {0}")]
    Validation(String),

    /// A keyed lookup (rating, asset id, netting set id) failed.
    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("empty exposure profile: {0}")]
    EmptyProfile(String),

    #[error("zero requirement for netting set {0}")]
    ZeroRequirement(String),

    #[error(
        "picard iteration did not converge at time step {step} (t = {time:.6}): \
         residual {residual:.3e} after {iterations} iterations"
    )]
    PicardDivergence {
        step: usize,
        time: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("allocation problem is infeasible: {0}")]
    Infeasible(String),

    #[error("allocation problem is unbounded")]
    Unbounded,

    #[error("simplex iteration limit of {0} reached")]
    IterationLimit(usize),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
