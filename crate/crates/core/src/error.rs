use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("probability {0} outside the open interval (0, 1)")]
    Domain(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not positive definite (pivot column {pivot}, remaining diagonal {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("design matrix is rank deficient; dependent columns: {columns:?}")]
    RankDeficient { columns: Vec<String> },

    #[error("interior point solver did not converge after {iterations} iterations (last relative gap {gap:e})")]
    NonConvergence { iterations: usize, gap: f64 },

    #[error("degenerate residual scale: all residuals identical")]
    DegenerateResidualScale,

    #[error("singular density sandwich: widen bandwidth or shrink model (min eigenvalue {min_eig:e})")]
    SingularDensitySandwich { min_eig: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("fit failed in fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("model {model} at tau {tau}: {source}")]
    Model {
        model: String,
        tau: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("replication {rep} (seed {seed}) failed: {source}")]
    Replication {
        rep: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NotPositiveDefinite { .. }
            | Error::RankDeficient { .. }
            | Error::NonConvergence { .. }
            | Error::DegenerateResidualScale
            | Error::SingularDensitySandwich { .. } => true,
            Error::Fold { source, .. } | Error::Replication { source, .. } | Error::Model { source, .. } => {
                source.is_numerical()
            }
            _ => false,
        }
    }
}
