use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("Hadamard order 2^{exponent} exceeds the configured maximum {max}")]
    Size { exponent: u32, max: usize },

    #[error("class count {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("index {index} out of range for order {order}")]
    Index { index: usize, order: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("field is degenerate (all active payoffs vanish)")]
    DegenerateField,

    #[error("non-finite value encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("step size fell below {min_dt:e} at t = {t}")]
    Stiffness { t: f64, min_dt: f64 },

    #[error("config error: {0}")]
    Config(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad input or configuration rather than
    /// by the numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Unknown { .. }
                | Error::Json(_)
                | Error::Size { .. }
                | Error::NotPowerOfTwo(_)
                | Error::Shape(_)
                | Error::Index { .. }
        )
    }
}
