use std::collections::{BTreeSet, HashMap};
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use arrow_schema::Schema;
use serde::{Deserialize, Serialize};

use super::columns::{modality_fields, records_to_batch};
use super::ipc::{row_groups, write_ipc_file};
use super::metadata::{LogMetadata, FORMAT_VERSION, META_FORMAT_VERSION, META_LOG, META_MODALITY};
use super::modality::Modality;
use super::payload::{write_blob, PayloadLocation, PayloadRef};
use super::records::EventStream;
use crate::error::{Error, IoContext, Result};

pub const LOCK_FILE: &str = ".write.lock";
pub const BLOB_DIR: &str = "blobs";

/// Where sensor payload bytes live after writing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageMode {
    /// Payload bytes written under `blobs/` and referenced by relative path.
    #[default]
    External,
    /// Payload bytes inlined into the stream files.
    SelfContained,
}

impl std::str::FromStr for StorageMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "external" => Ok(StorageMode::External),
            "self-contained" | "self_contained" => Ok(StorageMode::SelfContained),
            other => Err(Error::InvalidRecord { modality: "mode".into(), reason: format!("unknown storage mode `{other}`") }),
        }
    }
}

/// Exclusive advisory lock on a log directory, released on drop.
struct DirLock(PathBuf);

impl DirLock {
    fn acquire(dir: &Path) -> Result<Self> {
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(DirLock(path)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(dir.to_path_buf())),
            Err(e) => Err(Error::io(path, e)),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.0);
    }
}

/// Relative path of the external payload for `row` of `modality`.
pub fn blob_path(modality: &Modality, row: usize) -> PathBuf {
    Path::new(BLOB_DIR).join(modality.to_string()).join(format!("{row}.bin"))
}

/// Schema of a modality file with the log metadata embedded.
pub fn stream_schema(modality: &Modality, metadata: &LogMetadata) -> Arc<Schema> {
    let meta = HashMap::from([
        (META_LOG.to_string(), metadata.to_json()),
        (META_MODALITY.to_string(), modality.to_string()),
        (META_FORMAT_VERSION.to_string(), FORMAT_VERSION.to_string()),
    ]);
    Arc::new(Schema::new_with_metadata(modality_fields(modality), meta))
}

/// Writes a log directory: one IPC file per stream.
#[derive(Debug, Clone)]
pub struct LogWriter {
    dir: PathBuf,
    mode: StorageMode,
    payload_base: Option<PathBuf>,
}

impl LogWriter {
    pub fn new(dir: impl Into<PathBuf>, mode: StorageMode) -> Self {
        LogWriter { dir: dir.into(), mode, payload_base: None }
    }

    /// Directory that external payload paths of the input records are relative to.
    /// Defaults to the output directory.
    pub fn payload_base(mut self, base: impl Into<PathBuf>) -> Self {
        self.payload_base = Some(base.into());
        self
    }

    pub fn write(&self, streams: &[EventStream], metadata: &LogMetadata) -> Result<()> {
        metadata.validate()?;
        let mut seen = BTreeSet::new();
        for s in streams {
            if !seen.insert(s.modality.file_name()) {
                return Err(Error::DuplicateModalityFile(s.modality.file_name()));
            }
            s.validate()?;
            let known = match &s.modality {
                Modality::Camera(id) => metadata.cameras.contains_key(id),
                Modality::Lidar(id) => metadata.lidars.contains_key(id),
                _ => true,
            };
            if !known {
                return Err(Error::UnknownSensorId(s.modality.sensor_id().unwrap_or_default().to_string()));
            }
        }

        std::fs::create_dir_all(&self.dir).at(&self.dir)?;
        let _lock = DirLock::acquire(&self.dir)?;
        self.remove_stale_files(&seen)?;
        let base = self.payload_base.clone().unwrap_or_else(|| self.dir.clone());

        for s in streams {
            let mut records = s.records.clone();
            for (row, p) in records.payloads_mut().into_iter().enumerate() {
                *p = self.place_payload(&s.modality, row, p, &base)?;
            }
            let schema = stream_schema(&s.modality, metadata);
            let batches = row_groups(records.len())
                .map(|r| records_to_batch(&schema, &records, r))
                .collect::<Result<Vec<_>>>()?;
            write_ipc_file(&self.dir.join(s.modality.file_name()), &schema, &batches)?;
        }
        self.remove_stale_blobs(&seen)?;
        log::debug!("wrote {} streams to {}", streams.len(), self.dir.display());
        Ok(())
    }

    fn place_payload(&self, modality: &Modality, row: usize, p: &PayloadRef, base: &Path) -> Result<PayloadRef> {
        match self.mode {
            StorageMode::SelfContained => match &p.location {
                PayloadLocation::Inline(_) => Ok(p.clone()),
                PayloadLocation::External(_) => PayloadRef::inline(p.bytes(base)?, p.codec.clone()),
            },
            StorageMode::External => {
                let rel = blob_path(modality, row);
                if let PayloadLocation::External(src) = &p.location {
                    if *src == rel && base == self.dir {
                        return Ok(p.clone());
                    }
                }
                write_blob(&self.dir.join(&rel), &p.bytes(base)?)?;
                PayloadRef::external(rel, p.codec.clone())
            }
        }
    }

    /// Removes modality files and sync tables of an earlier write that this write
    /// does not replace.
    fn remove_stale_files(&self, keep: &BTreeSet<String>) -> Result<()> {
        for entry in std::fs::read_dir(&self.dir).at(&self.dir)? {
            let entry = entry.at(&self.dir)?;
            let name = entry.file_name().to_string_lossy().into_owned();
            let stale_stream = Modality::from_file_name(&name).is_some() && !keep.contains(&name);
            let sync = name.starts_with("sync_") && name.ends_with(".arrow");
            if stale_stream || sync {
                std::fs::remove_file(entry.path()).at(entry.path())?;
            }
        }
        Ok(())
    }

    /// Removes blob directories no stream of this write refers to.
    fn remove_stale_blobs(&self, keep: &BTreeSet<String>) -> Result<()> {
        let blobs = self.dir.join(BLOB_DIR);
        if blobs.is_dir() {
            for entry in std::fs::read_dir(&blobs).at(&blobs)? {
                let entry = entry.at(&blobs)?;
                let file = format!("{}.arrow", entry.file_name().to_string_lossy());
                if self.mode == StorageMode::SelfContained || !keep.contains(&file) {
                    std::fs::remove_dir_all(entry.path()).at(entry.path())?;
                }
            }
            if self.mode == StorageMode::SelfContained {
                std::fs::remove_dir(&blobs).at(&blobs)?;
            }
        }
        Ok(())
    }
}

/// Writes `streams` into `dir`. External payload paths in the input are resolved against `dir`.
pub fn write_log(dir: &Path, streams: &[EventStream], metadata: &LogMetadata, mode: StorageMode) -> Result<()> {
    LogWriter::new(dir, mode).write(streams, metadata)
}
