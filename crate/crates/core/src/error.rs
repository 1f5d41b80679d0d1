use std::path::PathBuf;

use crate::validation::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("empty track")]
    EmptyTrack,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("malformed frame ranges: {0}")]
    MalformedRanges(String),

    #[error("unknown swimmer class `{0}`")]
    UnknownClass(String),

    #[error("unknown frame id `{0}`")]
    UnknownFrame(String),

    #[error("singular homography")]
    SingularHomography,

    #[error("homography maps the frame to infinity")]
    UnboundedHomography,

    #[error("zero-dimension frame `{0}`")]
    ZeroDimensionFrame(String),

    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("{count} invalid annotation(s), first at `{path}`: {first}")]
    InvalidManifest {
        path: String,
        count: usize,
        first: Violation,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("missing detection runs: {}", .0.join(", "))]
    MissingRuns(Vec<String>),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("i/o error on `{path}`: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
