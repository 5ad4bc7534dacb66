use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure carries a stable machine-readable code (see [`Error::code`])
/// and maps onto one of two exit-code classes (see [`Error::exit_code`]).
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value in `{0}`")]
    NonFinite(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("instance {id}: {source}")]
    Instance {
        id: u32,
        #[source]
        source: Box<Error>,
    },

    #[error("scenario {id}: {source}")]
    Scenario {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("bad magic in tensor header: expected \"LFGT\", found {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported tensor format version {0}")]
    UnsupportedVersion(u32),

    #[error("unknown tensor dtype code {0}")]
    UnknownDtype(u32),

    #[error("truncated tensor: {0}")]
    Truncated(String),

    #[error("dtype mismatch: expected {expected}, found {found}")]
    DtypeMismatch {
        expected: &'static str,
        found: &'static str,
    },

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidPose(_) => "invalid_pose",
            Error::ShapeMismatch(_) => "shape_mismatch",
            Error::InvalidInput(_) => "invalid_input",
            Error::NonFinite(_) => "non_finite",
            Error::OutOfBounds(_) => "out_of_bounds",
            Error::Degenerate(_) => "degenerate_input",
            Error::Singular(_) => "singular_system",
            Error::Instance { source, .. } | Error::Scenario { source, .. } => source.code(),
            Error::BadMagic(_) => "bad_magic",
            Error::UnsupportedVersion(_) => "unsupported_version",
            Error::UnknownDtype(_) => "unknown_dtype",
            Error::Truncated(_) => "truncated_payload",
            Error::DtypeMismatch { .. } => "dtype_mismatch",
            Error::Manifest(_) => "manifest_error",
            Error::Config(_) => "config_error",
            Error::Json { .. } => "json_error",
            Error::Io { .. } => "io_error",
        }
    }

    /// 2 for malformed inputs, 3 for inputs that are well-formed but on which
    /// the computation cannot proceed.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) | Error::Singular(_) | Error::NonFinite(_) => 3,
            Error::Instance { source, .. } | Error::Scenario { source, .. } => source.exit_code(),
            _ => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
