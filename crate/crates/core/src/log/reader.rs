use std::collections::BTreeMap;
use std::ops::Range;
use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};

use arrow_array::cast::AsArray;
use arrow_buffer::Buffer;

use super::columns::{batch_to_records, modality_fields, timestamp_values, Columns};
use super::ipc::{IpcFile, ReadStats};
use super::metadata::{LogMetadata, FORMAT_VERSION, META_FORMAT_VERSION, META_LOG, META_MODALITY};
use super::modality::Modality;
use super::records::{EventStream, Record, StreamRecords};
use crate::error::{Error, IoContext, Result};
use crate::geom::TimePoint;

/// Prefix and suffix of persisted sync-table files.
pub const SYNC_PREFIX: &str = "sync_";
pub const SYNC_SUFFIX: &str = ".arrow";

/// One modality file of an open log. Row data is decoded on demand.
#[derive(Debug)]
pub struct StreamHandle {
    modality: Modality,
    file: IpcFile,
    timestamps: OnceLock<Vec<TimePoint>>,
    stats: Arc<ReadStats>,
}

impl StreamHandle {
    fn open(path: &Path, modality: Modality, stats: Arc<ReadStats>) -> Result<(Self, LogMetadata, String)> {
        let file = IpcFile::open(path, stats.clone())?;
        let meta = file.metadata();
        let get = |key: &str| meta.get(key).ok_or_else(|| Error::corrupt(path, format!("schema metadata lacks `{key}`")));
        if get(META_FORMAT_VERSION)? != FORMAT_VERSION {
            return Err(Error::corrupt(path, format!("unsupported format version `{}`", get(META_FORMAT_VERSION)?)));
        }
        if get(META_MODALITY)? != &modality.to_string() {
            return Err(Error::corrupt(path, format!("file holds modality `{}`", get(META_MODALITY)?)));
        }
        let raw = get(META_LOG)?.clone();
        let metadata = LogMetadata::from_json(&raw).map_err(|e| Error::corrupt(path, format!("log metadata: {e}")))?;
        let expected = modality_fields(&modality);
        let fields = file.schema().fields();
        let schema_ok = fields.len() == expected.len()
            && fields.iter().zip(&expected).all(|(a, b)| a.name() == b.name() && a.data_type() == b.data_type());
        if !schema_ok {
            return Err(Error::corrupt(path, "columns do not match the modality schema"));
        }
        let stream = StreamHandle { modality, file, timestamps: OnceLock::new(), stats };
        Ok((stream, metadata, raw))
    }

    pub fn modality(&self) -> &Modality {
        &self.modality
    }

    pub fn path(&self) -> &Path {
        self.file.path()
    }

    /// Row count, known from the footer without reading data.
    pub fn len(&self) -> usize {
        self.file.num_rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// The matching key of every row. Loaded once and validated as strictly increasing.
    pub fn timestamps(&self) -> Result<&[TimePoint]> {
        if let Some(t) = self.timestamps.get() {
            return Ok(t);
        }
        let mut all = Vec::with_capacity(self.len());
        for b in 0..self.file.num_batches() {
            all.extend(timestamp_values(&self.file.read_first_column(b)?, self.path())?);
        }
        if let Some(i) = all.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::corrupt(self.path(), format!("timestamps not strictly increasing at row {}", i + 1)));
        }
        let _ = self.timestamps.set(all);
        Ok(self.timestamps.get().unwrap())
    }

    /// Whether the timestamp column has been loaded.
    pub fn timestamps_loaded(&self) -> bool {
        self.timestamps.get().is_some()
    }

    fn out_of_range(&self, row: usize) -> Error {
        Error::InvalidRecord { modality: self.modality.to_string(), reason: format!("row {row} out of range (len {})", self.len()) }
    }

    /// Materializes one row, decoding only its row group.
    pub fn get(&self, row: usize) -> Result<Record> {
        let (batch, offset) = self.file.locate(row).ok_or_else(|| self.out_of_range(row))?;
        let rb = self.file.read_batch(batch)?;
        let cols = Columns { batch: &rb, path: self.path() };
        let recs = batch_to_records(&self.modality, &cols, offset..offset + 1)?;
        self.stats.add_records(1);
        Ok(recs.get(0).expect("one row decoded"))
    }

    /// Materializes a contiguous row range.
    pub fn read_range(&self, rows: Range<usize>) -> Result<StreamRecords> {
        if rows.end > self.len() || rows.start > rows.end {
            return Err(self.out_of_range(rows.end));
        }
        let mut out: Option<StreamRecords> = None;
        let mut row = rows.start;
        while row < rows.end {
            let (batch, offset) = self.file.locate(row).unwrap();
            let batch_end = self.file.batch_start(batch + 1);
            let take = (rows.end.min(batch_end)) - row;
            let rb = self.file.read_batch(batch)?;
            let cols = Columns { batch: &rb, path: self.path() };
            let part = batch_to_records(&self.modality, &cols, offset..offset + take)?;
            out = Some(match out {
                None => part,
                Some(acc) => append(acc, part),
            });
            row += take;
        }
        self.stats.add_records((rows.end - rows.start) as u64);
        Ok(out.unwrap_or_else(|| empty_records(&self.modality)))
    }

    pub fn read_all(&self) -> Result<EventStream> {
        Ok(EventStream { modality: self.modality.clone(), records: self.read_range(0..self.len())? })
    }

    /// Zero-copy view of an inline payload inside the mapped file, `None` for external payloads.
    pub fn inline_payload_view(&self, row: usize) -> Result<Option<Buffer>> {
        if !matches!(self.modality, Modality::Camera(_) | Modality::Lidar(_)) {
            return Err(Error::InvalidRecord { modality: self.modality.to_string(), reason: "stream has no payloads".into() });
        }
        let (batch, offset) = self.file.locate(row).ok_or_else(|| self.out_of_range(row))?;
        let rb = self.file.read_batch(batch)?;
        let col = rb
            .column_by_name("payload_inline")
            .and_then(|c| c.as_binary_opt::<i32>())
            .ok_or_else(|| Error::corrupt(self.path(), "payload_inline column"))?;
        if col.is_null(offset) {
            return Ok(None);
        }
        let offsets = col.value_offsets();
        let (start, end) = (offsets[offset] as usize, offsets[offset + 1] as usize);
        Ok(Some(col.values().slice_with_length(start, end - start)))
    }

    /// Address range of the mapped file.
    pub fn mapped_range(&self) -> Range<usize> {
        self.file.mapped_range()
    }
}

use arrow_array::Array;

fn empty_records(m: &Modality) -> StreamRecords {
    match m {
        Modality::EgoState => StreamRecords::EgoState(Vec::new()),
        Modality::Boxes => StreamRecords::Boxes(Vec::new()),
        Modality::TrafficLights => StreamRecords::TrafficLights(Vec::new()),
        Modality::Camera(_) => StreamRecords::Camera(Vec::new()),
        Modality::Lidar(_) => StreamRecords::Lidar(Vec::new()),
    }
}

fn append(a: StreamRecords, b: StreamRecords) -> StreamRecords {
    use StreamRecords::*;
    match (a, b) {
        (EgoState(mut x), EgoState(y)) => {
            x.extend(y);
            EgoState(x)
        }
        (Boxes(mut x), Boxes(y)) => {
            x.extend(y);
            Boxes(x)
        }
        (TrafficLights(mut x), TrafficLights(y)) => {
            x.extend(y);
            TrafficLights(x)
        }
        (Camera(mut x), Camera(y)) => {
            x.extend(y);
            Camera(x)
        }
        (Lidar(mut x), Lidar(y)) => {
            x.extend(y);
            Lidar(x)
        }
        _ => unreachable!("one stream decodes to one record type"),
    }
}

/// An open log directory. Opening reads footers and schemas only.
#[derive(Debug)]
pub struct LogHandle {
    dir: PathBuf,
    metadata: LogMetadata,
    streams: BTreeMap<Modality, StreamHandle>,
    sync_files: BTreeMap<String, PathBuf>,
    stats: Arc<ReadStats>,
}

impl Drop for LogHandle {
    fn drop(&mut self) {
        self.stats.handle_closed();
    }
}

/// Compares two metadata JSON documents key by key, returning the first differing key.
fn differing_key(a: &str, b: &str) -> Option<String> {
    let (Ok(serde_json::Value::Object(a)), Ok(serde_json::Value::Object(b))) =
        (serde_json::from_str::<serde_json::Value>(a), serde_json::from_str::<serde_json::Value>(b))
    else {
        return Some(META_LOG.to_string());
    };
    a.keys().chain(b.keys()).find(|k| a.get(*k) != b.get(*k)).cloned()
}

pub fn open_log(dir: &Path) -> Result<LogHandle> {
    open_log_with_stats(dir, ReadStats::new())
}

/// Opens a log, recording file access in `stats`.
pub fn open_log_with_stats(dir: &Path, stats: Arc<ReadStats>) -> Result<LogHandle> {
    if !dir.is_dir() {
        return Err(Error::SourceNotFound(dir.to_path_buf()));
    }
    let mut names: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).at(dir)? {
        let entry = entry.at(dir)?;
        names.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
    }
    names.sort();

    let mut streams = BTreeMap::new();
    let mut sync_files = BTreeMap::new();
    let mut reference: Option<(LogMetadata, String)> = None;
    for (name, path) in names {
        if let Some(modality) = Modality::from_file_name(&name) {
            let (stream, meta, raw) = StreamHandle::open(&path, modality.clone(), stats.clone())?;
            match &reference {
                None => reference = Some((meta, raw)),
                Some((_, first)) => {
                    if let Some(key) = differing_key(first, &raw) {
                        return Err(Error::MetadataMismatch { key, path });
                    }
                }
            }
            streams.insert(modality, stream);
        } else if let Some(sync) = name.strip_prefix(SYNC_PREFIX).and_then(|n| n.strip_suffix(SYNC_SUFFIX)) {
            sync_files.insert(sync.to_string(), path);
        }
    }
    let Some((metadata, _)) = reference else {
        return Err(Error::EmptyLog(dir.to_path_buf()));
    };
    stats.handle_opened();
    Ok(LogHandle { dir: dir.to_path_buf(), metadata, streams, sync_files, stats })
}

impl LogHandle {
    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn metadata(&self) -> &LogMetadata {
        &self.metadata
    }

    pub fn stats(&self) -> &Arc<ReadStats> {
        &self.stats
    }

    pub fn modalities(&self) -> impl Iterator<Item = &Modality> {
        self.streams.keys()
    }

    pub fn has(&self, m: &Modality) -> bool {
        self.streams.contains_key(m)
    }

    pub fn stream(&self, m: &Modality) -> Result<&StreamHandle> {
        self.streams.get(m).ok_or_else(|| Error::MissingModality(m.to_string()))
    }

    pub fn streams(&self) -> impl Iterator<Item = &StreamHandle> {
        self.streams.values()
    }

    /// Names of persisted sync tables (`sync_<name>.arrow`).
    pub fn sync_names(&self) -> impl Iterator<Item = &str> {
        self.sync_files.keys().map(String::as_str)
    }

    pub fn sync_path(&self, name: &str) -> Option<&Path> {
        self.sync_files.get(name).map(PathBuf::as_path)
    }

    /// Reads every stream in full.
    pub fn read_all(&self) -> Result<Vec<EventStream>> {
        self.streams.values().map(StreamHandle::read_all).collect()
    }
}
