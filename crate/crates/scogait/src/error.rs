use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("silhouette has no foreground pixels")]
    EmptySilhouette,

    #[error("all frames of the sequence are empty")]
    EmptySequence,

    #[error("failed to load image {path}: {source}")]
    ImageLoad {
        path: PathBuf,
        source: image::ImageError,
    },

    #[error("image {path} has differing channel values; expected a single-channel mask")]
    ImageFormat { path: PathBuf },

    #[error("subject {subject} appears under labels {a} and {b}")]
    ManifestConflict {
        subject: String,
        a: String,
        b: String,
    },

    #[error("dataset layout violation at {path}: {reason}")]
    Layout { path: PathBuf, reason: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("ratio subsampling error: {0}")]
    Ratio(String),

    #[error("batch sampler error: {0}")]
    Sampler(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("non-finite loss at iteration {iter}; batch: {batch}")]
    NonFiniteLoss { iter: u64, batch: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (configs, layouts, CLI args).
    /// The CLI maps these to exit code 1; runtime failures map to 2.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Layout { .. }
                | Error::ManifestConflict { .. }
                | Error::Split(_)
                | Error::Ratio(_)
                | Error::Shape(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
