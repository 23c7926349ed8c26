use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate rotation: |p| = {norm:.3e} is below 1e-6")]
    DegenerateRotation { norm: f64 },

    #[error("not a rigid transform: {reason}")]
    NotRigid { reason: String },

    #[error("decalibration exceeds encoding range: {component} = {value:.6} exceeds {bound:.6}")]
    DecalibOutOfRange {
        component: &'static str,
        value: f64,
        bound: f64,
    },

    #[error("kernel must be odd, got {0}")]
    EvenKernel(usize),

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate scene configuration: no seed within {attempts} retries satisfied the visibility invariant")]
    DegenerateScene { attempts: usize },

    #[error("non-finite loss at step {step}; diagnostic checkpoint at {checkpoint}")]
    NonFiniteLoss { step: u64, checkpoint: String },

    #[error("truncated file {path}: {len} bytes is not a multiple of {record} (offset {offset})")]
    TruncatedFile {
        path: String,
        len: u64,
        record: u64,
        offset: u64,
    },

    #[error("missing calibration key `{key}` in {path}")]
    MissingCalibKey { key: String, path: String },

    #[error("malformed value for `{key}` in {path}: {detail}")]
    MalformedCalib {
        key: String,
        path: String,
        detail: String,
    },

    #[error("checkpoint format error: {0}")]
    BadCheckpoint(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{0}")]
    Other(String),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
