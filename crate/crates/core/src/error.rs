use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("kernel evaluated at the zero displacement")]
    ZeroDisplacement,
    #[error("vertex sets overlap")]
    OverlappingSets,
    #[error("kernel tail diverges (decay exponent {exponent} <= dimension {dim})")]
    DivergentTail { exponent: f64, dim: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("an edge needs two distinct endpoints")]
    SelfLoop,
    #[error("sprinkled configurations must use distinct streams")]
    SameStream,
    #[error("miss budget cannot be met: {0}")]
    BudgetInfeasible(String),
    #[error("source vertex lies outside the region")]
    SourceOutsideSet,
    #[error("empty vertex set")]
    EmptySet,
    #[error("empty source set")]
    EmptySources,
    #[error("proxy infinite cluster is empty")]
    EmptyProxy,
    #[error("configuration is subcritical: {0}")]
    SubcriticalRegime(String),
    #[error("norm table is degenerate: {0}")]
    DegenerateNorm(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("the origin is not in the vertex set")]
    OriginMissing,
    #[error("criterion never crosses 1/2 in the searched range")]
    NoCrossing,
    #[error("inconsistent geometry: {0}")]
    GeometryInfeasible(String),
    #[error("invalid sprinkling split: {0}")]
    SplitInvalid(String),
    #[error("random walk starts at an isolated vertex")]
    IsolatedStart,
    #[error("source and target set are not connected")]
    Disconnected,
    #[error("iterative solver did not converge: {0}")]
    NotConverged(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
