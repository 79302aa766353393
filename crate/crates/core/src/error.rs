use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid resolution: {0}")]
    InvalidResolution(String),

    #[error("insufficient nodes: requested {requested}, available {available}")]
    InsufficientNodes { requested: usize, available: usize },

    #[error("point {point:?} lies outside the computational domain")]
    OutOfDomain { point: Vec<f64> },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("singular kernel: {0}")]
    SingularKernel(String),

    #[error("singular local system ({context}): pivot {pivot:e} at row {row}")]
    SingularSystem {
        context: String,
        row: usize,
        pivot: f64,
    },

    #[error("ILU(0) breakdown: zero pivot in row {row}")]
    PreconditionerBreakdown { row: usize },

    #[error("GMRES did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        best: Vec<f64>,
    },

    #[error("time step {step}: {source}")]
    Integration {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid time grid: {0}")]
    InvalidTimeGrid(String),

    #[error("invalid patch cover: {0}")]
    InvalidCover(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("unknown problem `{0}`")]
    UnknownProblem(String),

    #[error("problem `{0}` has no reference values")]
    MissingReference(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Replaces the context label of a singular-system error, leaving other
    /// variants untouched.
    pub fn with_context(self, context: impl Into<String>) -> Self {
        match self {
            Error::SingularSystem { row, pivot, .. } => Error::SingularSystem {
                context: context.into(),
                row,
                pivot,
            },
            other => other,
        }
    }
}
