use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("SVD did not converge")]
    SvdNoConvergence,

    #[error("matrix exponential overflowed (input 1-norm {norm:.3e})")]
    ExpmOverflow { norm: f64 },

    #[error("column {column} is linearly dependent on the preceding columns")]
    RankDeficient { column: usize },

    #[error("zero variance in correlation input")]
    ZeroVariance,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("matrix contains a negative entry {value} at ({row}, {col})")]
    Negative { row: usize, col: usize, value: f64 },

    #[error("requested rank {requested} exceeds the achievable rank {achievable}")]
    RankTooHigh { requested: usize, achievable: usize },

    #[error("degenerate simplex: no remaining row is farther than {tol:e} from the span of {chosen} chosen rows")]
    DegenerateSimplex { chosen: usize, tol: f64 },

    #[error("matrix is numerically singular")]
    Singular,

    #[error("objective is infinite at the starting point")]
    InfiniteStart,

    #[error("objective returned NaN at {point:?}")]
    NanObjective { point: Vec<f64> },

    #[error("invalid value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("all {} restarts failed: {}", .0.len(), .0.join("; "))]
    AllRestartsFailed(Vec<String>),

    #[error("{file}:{line}: {message}")]
    Parse { file: String, line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig { key: key.into(), reason: reason.into() }
    }

    /// Stable machine-readable tag, used in the CLI's error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::SvdNoConvergence => "svd_no_convergence",
            Error::ExpmOverflow { .. } => "expm_overflow",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::ZeroVariance => "zero_variance",
            Error::Shape(_) => "shape_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::Negative { .. } => "negative_entry",
            Error::RankTooHigh { .. } => "rank_too_high",
            Error::DegenerateSimplex { .. } => "degenerate_simplex",
            Error::Singular => "singular",
            Error::InfiniteStart => "infinite_start",
            Error::NanObjective { .. } => "nan_objective",
            Error::InvalidConfig { .. } => "invalid_config",
            Error::AllRestartsFailed(_) => "all_restarts_failed",
            Error::Parse { .. } => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
