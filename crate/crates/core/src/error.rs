use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    NotFound(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {}: {reason}", path.display())]
    Decode { path: PathBuf, reason: String },

    #[error("cannot encode image {}: {reason}", path.display())]
    Encode { path: PathBuf, reason: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("region {region:?} outside {width}x{height} image")]
    OutOfBounds {
        region: crate::Region,
        width: u32,
        height: u32,
    },

    #[error("malformed json in {}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("unknown category id {0}")]
    UnknownCategory(u64),

    #[error("unknown image id {0}")]
    UnknownImage(u64),

    #[error("invalid detection at index {index}: {reason}")]
    InvalidDetection { index: usize, reason: String },

    #[error("missing lighting flags: {0}")]
    MissingFlags(String),

    #[error("source directory {} contains no readable images", .0.display())]
    EmptySource(PathBuf),

    #[error("no source image in {} is at least {side}x{side}", dir.display())]
    SourcesTooSmall { dir: PathBuf, side: u32 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures to read or write files, as opposed to bad parameters or content.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::NotFound(_) | Error::Io { .. } | Error::Encode { .. } | Error::Decode { .. }
        )
    }
}
