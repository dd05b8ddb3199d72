use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tuple has {got} points but the region needs {expected}")]
    Arity { expected: usize, got: usize },

    #[error("point has dimension {got}, expected {expected}")]
    Dimension { expected: usize, got: usize },

    #[error("non-finite coordinate in {0}")]
    NonFinite(&'static str),

    #[error("localization parameter must be nonnegative, got {0}")]
    NegativeTau(f64),

    #[error("localization parameter must be positive")]
    ZeroTau,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least {needed} sample points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("unsupported family for this operation: {0}")]
    UnsupportedFamily(String),

    #[error("quadrature did not converge within {max_evals} evaluations (error estimate {estimate:e})")]
    Quadrature { max_evals: usize, estimate: f64 },

    #[error("unknown density `{0}`")]
    UnknownDensity(String),

    #[error("unknown recipe `{0}`")]
    UnknownRecipe(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("cluster sets cover different sample sizes ({0} vs {1})")]
    SizeMismatch(usize, usize),

    #[error("line {line}, column {column}: {message}")]
    Csv {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("envelope violated: density {value} exceeds envelope {envelope}")]
    Envelope { value: f64, envelope: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
