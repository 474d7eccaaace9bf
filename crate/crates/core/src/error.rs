use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("undefined transition: interior vertex {0} has degree 0")]
    UndefinedTransition(usize),
    #[error("non-transient walk: spectral radius bound {0} is not below 1")]
    NonTransientWalk(f64),
    #[error("graph parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },
    #[error("eigenvalue budget exceeded: cutoff needs about {required} eigenvalues, budget is {budget}")]
    BudgetExceeded { required: usize, budget: usize },
    #[error("outside series domain (s = {0}); use the log-determinant path")]
    OutsideSeriesDomain(f64),
    #[error("corners violate smooth-boundary hypothesis")]
    CornerGuard,
    #[error("divergent loop-mass query: {0}")]
    DivergentQuery(String),
    #[error("resolution exhausted: square at level {level} is finer than the 2^{grid_level} grid")]
    ResolutionExhausted { level: u32, grid_level: u32 },
    #[error("singular Schur complement for a partition of {0} squares")]
    SingularSchur(usize),
    #[error("vertex {0} out of range")]
    VertexOutOfRange(usize),
    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
