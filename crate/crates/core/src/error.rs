use std::path::PathBuf;

/// Error type shared across the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input data (bad WAV header, corrupt weight file, bad manifest row).
    #[error("format error: {0}")]
    Format(String),

    /// Input is well-formed but uses a feature this pipeline does not handle
    /// (e.g. 24-bit PCM, compressed codecs).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Invalid configuration or parameters (bad hyperparameters, infeasible
    /// perplexity, empty filter bands, K out of range).
    #[error("configuration error: {0}")]
    Config(String),

    /// Tensor or vector dimensions do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Clip is shorter than the 1 s analysis window.
    #[error("clip too short: {seconds:.3} s, need at least {required:.1} s")]
    ClipTooShort { seconds: f64, required: f64 },

    /// Data is degenerate for the requested operation (e.g. PCA on identical points).
    #[error("degenerate data: {0}")]
    DegenerateData(String),

    /// An operation was called out of order (e.g. backward before forward).
    #[error("state error: {0}")]
    State(String),

    /// Internal invariant violated; indicates config drift or a bug.
    #[error("internal error: {0}")]
    Internal(String),

    /// Training diverged (NaN loss).
    #[error("training diverged at epoch {epoch}, step {step}: loss is not finite (learning rate too high?)")]
    Diverged { epoch: usize, step: usize },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
