use thiserror::Error;

pub type Result<T, E = SsosError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SsosError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid structure: {0}")]
    Structure(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A monomial of the objective cannot be written as a product of two
    /// basis entries.
    #[error("monomial {alpha} is not expressible as a product of two basis entries")]
    NotExpressible { alpha: String },

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("extraction failed: {0}")]
    Extraction(String),

    #[error("instance generation failed: {0}")]
    Generation(String),

    #[error("local optimizer diverged: {0}")]
    Divergence(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl SsosError {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        SsosError::Parse {
            line,
            msg: msg.into(),
        }
    }
}
