use std::path::PathBuf;

use crate::error::Result;
use crate::log::{EventStream, LogMetadata};
use crate::map::{MapObject, MapScope};

/// Map content shipped with a source log.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceMap {
    pub objects: Vec<MapObject>,
    pub scope: MapScope,
    /// File stem for dataset-wide maps shared by several logs.
    pub name: String,
}

/// One log in canonical conventions, ready for the writers.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedLog {
    pub metadata: LogMetadata,
    /// Streams sorted by timestamp, one per modality.
    pub streams: Vec<EventStream>,
    pub map: Option<SourceMap>,
    /// Directory that external payload paths of `streams` are relative to.
    pub payload_base: Option<PathBuf>,
}

/// Everything dataset-specific lives behind this trait: enumerating a source's logs
/// and translating one of them into records in body/camera conventions.
pub trait DatasetParser {
    fn name(&self) -> &str;

    fn log_ids(&self) -> Result<Vec<String>>;

    fn parse_log(&self, log_id: &str) -> Result<ParsedLog>;
}
