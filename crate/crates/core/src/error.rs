use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("non-finite entries in {0}")]
    NonFinite(&'static str),

    #[error("schema error at {path}: {message}")]
    Schema { path: String, message: String },

    /// The stacked Lyapunov-Metzler operator is singular; no unique solution.
    #[error("existence violated: {0}")]
    ExistenceViolated(String),

    /// A solution exists but fails the definiteness or residual checks.
    #[error("infeasible in mode {mode}: {reason} (min eigenvalue {min_eigenvalue:.3e})")]
    Infeasible {
        mode: usize,
        min_eigenvalue: f64,
        reason: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("certificate mismatch: {0}")]
    Mismatch(String),

    #[error("trajectory diverged at t = {t}: {reason}")]
    Divergence { t: f64, reason: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }
}
