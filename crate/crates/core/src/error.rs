use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cannot split {n} items into {parts} nonempty parts with fractions {fractions:?}")]
    Split {
        n: usize,
        parts: usize,
        fractions: Vec<f64>,
    },

    #[error("calibration error: {0}")]
    Calibration(String),

    #[error("shape mismatch: expected {expected} classes, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: u64,
        msg: String,
    },

    #[error("training diverged at epoch {epoch} (loss = {loss}); try a smaller learning rate")]
    Training { epoch: usize, loss: f64 },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by bad user configuration rather than by the data or environment.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}
