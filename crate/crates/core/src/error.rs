use std::path::PathBuf;

use crate::geom::TimePoint;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad input from the caller: flags, filters, ids, paths.
    User,
    /// On-disk data is damaged or inconsistent.
    Corruption,
    /// Everything else.
    Internal,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // geometry
    #[error("quaternion norm {norm} deviates from 1 by more than 1e-3")]
    CorruptQuaternion { norm: f64 },
    #[error("invalid camera model: {0}")]
    InvalidCamera(String),
    #[error("invalid vehicle parameters: {0}")]
    InvalidVehicle(String),
    #[error("pose origin {0} cannot be resolved to a reference offset")]
    UnknownOrigin(String),

    // log format
    #[error("timestamps of stream `{modality}` are not strictly increasing at row {row}")]
    UnsortedTimestamps { modality: String, row: usize },
    #[error("more than one stream maps to file `{0}`")]
    DuplicateModalityFile(String),
    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },
    #[error("metadata key `{key}` in {path} differs from the other files of the log")]
    MetadataMismatch { key: String, path: PathBuf },
    #[error("log directory {0} contains no modality files")]
    EmptyLog(PathBuf),
    #[error("payload not found: {0}")]
    MissingPayload(PathBuf),
    #[error("codec `{0}` cannot be decoded to points")]
    CodecUnsupportedForDecode(String),
    #[error("payload corrupt: {0}")]
    PayloadCorrupt(String),
    #[error("invalid payload path `{0}`: must be relative without `..`")]
    InvalidPayloadPath(String),
    #[error("invalid record in `{modality}`: {reason}")]
    InvalidRecord { modality: String, reason: String },
    #[error("directory {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("unknown modality `{0}`")]
    UnknownModality(String),

    // sync
    #[error("modality `{0}` is not present in the log")]
    MissingModality(String),
    #[error("reference stream `{0}` is empty")]
    EmptyReferenceStream(String),
    #[error("invalid sync configuration: {0}")]
    InvalidSyncConfig(String),

    // map
    #[error("malformed WKB: {0}")]
    MalformedWkb(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("unknown map layer `{0}`")]
    UnknownLayer(String),
    #[error("map layer `{0}` has no objects")]
    LayerEmpty(String),
    #[error("unknown map object id `{0}`")]
    UnknownId(String),
    #[error("object `{from}` references missing id `{missing}`")]
    DanglingReference { from: String, missing: String },
    #[error("duplicate map object id `{0}`")]
    DuplicateId(String),

    // scene
    #[error("unknown split `{0}`")]
    UnknownSplit(String),
    #[error("invalid scene filter: {0}")]
    InvalidFilter(String),
    #[error("iteration {iteration} outside [{min}, {max}]")]
    IterationOutOfRange { iteration: i64, min: i64, max: i64 },
    #[error("unknown sensor id `{0}`")]
    UnknownSensorId(String),
    #[error("no `{modality}` event matches {timestamp}")]
    NoMatchWithinTolerance { modality: String, timestamp: TimePoint },
    #[error("map unavailable: {0}")]
    MapUnavailable(String),

    // ingest
    #[error("{path}:{line}: {reason}")]
    SchemaViolation { path: PathBuf, line: usize, reason: String },
    #[error("{path}:{line}: timestamp {timestamp} is not after the previous record")]
    NonMonotonicTimestamps { path: PathBuf, line: usize, timestamp: TimePoint },
    #[error("{path}:{line}: unknown frame tag `{tag}`")]
    UnknownFrameTag { path: PathBuf, line: usize, tag: String },
    #[error("cannot fetch source `{0}`: only local directories and file:// URLs are supported")]
    FetchUnsupported(String),
    #[error("source not found: {0}")]
    SourceNotFound(PathBuf),

    // analytics
    #[error("track is empty")]
    EmptyTrack,
    #[error("label `{0}` is not covered by the taxonomy")]
    UnmappedLabel(String),

    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Arrow(#[from] arrow_schema::ArrowError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn corrupt(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::CorruptFile { path: path.into(), reason: reason.to_string() }
    }

    pub fn kind(&self) -> ErrorKind {
        use Error::*;
        match self {
            CorruptQuaternion { .. }
            | CorruptFile { .. }
            | MetadataMismatch { .. }
            | MissingPayload(_)
            | PayloadCorrupt(_)
            | MalformedWkb(_)
            | Arrow(_) => ErrorKind::Corruption,
            Io { .. } | Json(_) => ErrorKind::Internal,
            _ => ErrorKind::User,
        }
    }
}

pub(crate) trait IoContext<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T>;
}

impl<T> IoContext<T> for std::io::Result<T> {
    fn at(self, path: impl Into<PathBuf>) -> Result<T> {
        self.map_err(|e| Error::io(path, e))
    }
}
