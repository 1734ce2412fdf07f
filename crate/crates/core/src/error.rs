use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("cannot reshape {from:?} ({from_len} elements) into {to:?} ({to_len} elements)")]
    ElementCount {
        from: Vec<usize>,
        from_len: usize,
        to: Vec<usize>,
        to_len: usize,
    },

    #[error("invalid shape {0:?}: every extent must be at least 1")]
    InvalidShape(Vec<usize>),

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("filter {filter:?} is larger than input {input:?}")]
    FilterTooLarge { filter: [usize; 2], input: [usize; 2] },

    #[error("pooling window {window:?} is larger than input {input:?}")]
    WindowTooLarge { window: [usize; 2], input: [usize; 2] },

    #[error("layer expects {expected} input channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("layer {index} ({layer}): {reason}")]
    Build {
        index: usize,
        layer: String,
        reason: String,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },

    #[error("checkpoint: bad magic bytes")]
    CheckpointMagic,

    #[error("checkpoint: unsupported format version {found} (this build reads version {supported})")]
    CheckpointVersion { found: u32, supported: u32 },

    #[error("checkpoint: file truncated")]
    CheckpointTruncated,

    #[error("checkpoint: checksum mismatch (stored {stored:08x}, computed {computed:08x})")]
    CheckpointChecksum { stored: u32, computed: u32 },

    #[error("person {person}: needs at least {needed} {kind} samples, found {found}")]
    Shortfall {
        person: String,
        kind: &'static str,
        needed: usize,
        found: usize,
    },

    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("image {path}: {reason}")]
    Image { path: PathBuf, reason: String },

    #[error("{0} is undefined: no samples in its denominator")]
    UndefinedMetric(&'static str),

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

    pub(crate) fn shape(op: &'static str, left: &[usize], right: &[usize]) -> Self {
        Error::ShapeMismatch {
            op,
            left: left.to_vec(),
            right: right.to_vec(),
        }
    }

    /// True for errors caused by the filesystem rather than by inputs or configuration.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
