use thiserror::Error;

/// Errors surfaced by the pipeline library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: String,
        line: usize,
        message: String,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("zero-norm vector at row {0}")]
    ZeroNorm(usize),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("misaligned cross-lingual pairs: {0}")]
    Misaligned(String),

    #[error("model format error: {0}")]
    ModelFormat(String),

    #[error("non-finite loss at step {step} (epoch {epoch}): {value}")]
    NonFiniteLoss { step: usize, epoch: usize, value: f64 },

    #[error("config error: {0}")]
    Config(String),
}

impl CoreError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
