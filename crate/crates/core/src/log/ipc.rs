//! Memory-mapped Arrow IPC files with read instrumentation.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, AtomicU64, Ordering};
use std::sync::Arc;

use arrow_array::RecordBatch;
use arrow_buffer::Buffer;
use arrow_ipc::convert::try_fb_to_schema;
use arrow_ipc::reader::{read_footer_length, FileDecoder};
use arrow_ipc::writer::FileWriter;
use arrow_ipc::{root_as_footer, root_as_message, Block};
use arrow_schema::{Metadata, SchemaRef};

use crate::error::{Error, IoContext, Result};

/// Rows per record batch written by this crate.
pub const ROW_GROUP_SIZE: usize = 1024;

const MAGIC: &[u8; 6] = b"ARROW1";

/// Counters shared by every file opened through one reader context.
#[derive(Debug, Default)]
pub struct ReadStats {
    files_opened: AtomicU64,
    footer_bytes: AtomicU64,
    index_batches: AtomicU64,
    record_batches: AtomicU64,
    bytes_decoded: AtomicU64,
    records_read: AtomicU64,
    live_handles: AtomicI64,
}

/// Point-in-time copy of [`ReadStats`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ReadStatsSnapshot {
    pub files_opened: u64,
    /// Footer and message-header bytes touched while opening.
    pub footer_bytes: u64,
    /// Batches decoded for timestamp or sync-table columns only.
    pub index_batches: u64,
    /// Batches decoded to materialize records.
    pub record_batches: u64,
    /// Bytes of record-batch blocks decoded, index and record reads combined.
    pub bytes_decoded: u64,
    /// Records materialized for callers.
    pub records_read: u64,
    /// Log handles currently alive.
    pub live_handles: i64,
}

impl ReadStats {
    pub fn new() -> Arc<Self> {
        Arc::new(Self::default())
    }

    pub fn snapshot(&self) -> ReadStatsSnapshot {
        ReadStatsSnapshot {
            files_opened: self.files_opened.load(Ordering::Relaxed),
            footer_bytes: self.footer_bytes.load(Ordering::Relaxed),
            index_batches: self.index_batches.load(Ordering::Relaxed),
            record_batches: self.record_batches.load(Ordering::Relaxed),
            bytes_decoded: self.bytes_decoded.load(Ordering::Relaxed),
            records_read: self.records_read.load(Ordering::Relaxed),
            live_handles: self.live_handles.load(Ordering::Relaxed),
        }
    }

    pub(crate) fn add_records(&self, n: u64) {
        self.records_read.fetch_add(n, Ordering::Relaxed);
    }

    pub(crate) fn handle_opened(&self) {
        self.live_handles.fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn handle_closed(&self) {
        self.live_handles.fetch_sub(1, Ordering::Relaxed);
    }
}

/// Writes `batches` as an IPC file, atomically replacing `path`.
pub(crate) fn write_ipc_file(path: &Path, schema: &SchemaRef, batches: &[RecordBatch]) -> Result<()> {
    let tmp = path.with_extension("arrow.tmp");
    let file = File::create(&tmp).at(&tmp)?;
    let result = (|| -> Result<()> {
        let mut writer = FileWriter::try_new(BufWriter::new(file), schema)?;
        for b in batches {
            writer.write(b)?;
        }
        writer.finish()?;
        writer.into_inner()?.into_inner().map_err(|e| Error::io(&tmp, e.into_error()))?.sync_all().at(&tmp)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(e);
    }
    std::fs::rename(&tmp, path).at(path)
}

/// Splits `n` rows into consecutive row-group ranges.
pub(crate) fn row_groups(n: usize) -> impl Iterator<Item = std::ops::Range<usize>> {
    (0..n).step_by(ROW_GROUP_SIZE).map(move |s| s..(s + ROW_GROUP_SIZE).min(n))
}

/// A read-only, memory-mapped IPC file. Opening touches only the footer and
/// the per-batch message headers.
pub struct IpcFile {
    path: PathBuf,
    buffer: Buffer,
    schema: SchemaRef,
    blocks: Vec<Block>,
    /// Row index where each batch starts, plus the total row count.
    batch_starts: Vec<usize>,
    decoder: FileDecoder,
    first_column: FileDecoder,
    stats: Arc<ReadStats>,
}

impl std::fmt::Debug for IpcFile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("IpcFile").field("path", &self.path).field("rows", &self.num_rows()).finish()
    }
}

impl IpcFile {
    pub fn open(path: &Path, stats: Arc<ReadStats>) -> Result<Self> {
        let file = File::open(path).at(path)?;
        let len = file.metadata().at(path)?.len() as usize;
        if len < 2 * MAGIC.len() + 10 {
            return Err(Error::corrupt(path, "file too short for an Arrow IPC file"));
        }
        // SAFETY: log files are immutable once written; writers replace files by rename.
        let mmap = unsafe { memmap2::Mmap::map(&file) }.at(path)?;
        let buffer = Buffer::from(bytes::Bytes::from_owner(mmap));
        Self::from_buffer(path.to_path_buf(), buffer, stats)
    }

    fn from_buffer(path: PathBuf, buffer: Buffer, stats: Arc<ReadStats>) -> Result<Self> {
        let corrupt = |reason: String| Error::corrupt(&path, reason);
        let len = buffer.len();
        if &buffer[..MAGIC.len()] != MAGIC || &buffer[len - MAGIC.len()..] != MAGIC {
            return Err(corrupt("missing Arrow magic bytes (truncated?)".into()));
        }
        let trailer: [u8; 10] = buffer[len - 10..].try_into().unwrap();
        let footer_len = read_footer_length(trailer).map_err(|e| corrupt(e.to_string()))?;
        if footer_len + 10 + 8 > len {
            return Err(corrupt("footer length exceeds file size".into()));
        }
        let footer_start = len - 10 - footer_len;
        let footer = root_as_footer(&buffer[footer_start..len - 10]).map_err(|e| corrupt(format!("footer: {e}")))?;
        let fb_schema = footer.schema().ok_or_else(|| corrupt("footer has no schema".into()))?;
        let schema = Arc::new(try_fb_to_schema(fb_schema).map_err(|e| corrupt(format!("schema: {e}")))?);
        let mut touched = footer_len as u64 + 10;

        let mut decoder = FileDecoder::new(schema.clone(), footer.version()).with_require_alignment(false);
        let mut first_column = FileDecoder::new(schema.clone(), footer.version())
            .with_require_alignment(false)
            .with_projection(vec![0]);
        let check_block = |b: &Block| -> Result<Buffer> {
            let start = usize::try_from(b.offset()).map_err(|_| corrupt("negative block offset".into()))?;
            let block_len = b.metaDataLength() as usize + b.bodyLength() as usize;
            if b.metaDataLength() < 0 || b.bodyLength() < 0 || start + block_len > footer_start {
                return Err(corrupt("record block lies outside the file body".into()));
            }
            Ok(buffer.slice_with_length(start, block_len))
        };
        for block in footer.dictionaries().iter().flatten() {
            let data = check_block(block)?;
            decoder.read_dictionary(block, &data).map_err(|e| corrupt(e.to_string()))?;
            first_column.read_dictionary(block, &data).map_err(|e| corrupt(e.to_string()))?;
            touched += data.len() as u64;
        }

        let blocks: Vec<Block> = footer.recordBatches().map(|b| b.iter().copied().collect()).unwrap_or_default();
        let mut batch_starts = Vec::with_capacity(blocks.len() + 1);
        let mut rows = 0usize;
        for block in &blocks {
            let data = check_block(block)?;
            let meta = &data[..block.metaDataLength() as usize];
            let (prefix, msg_len) = if meta.len() >= 8 && meta[..4] == [0xff; 4] {
                (8, i32::from_le_bytes(meta[4..8].try_into().unwrap()))
            } else if meta.len() >= 4 {
                (4, i32::from_le_bytes(meta[..4].try_into().unwrap()))
            } else {
                return Err(corrupt("record block header truncated".into()));
            };
            let msg_end = prefix + usize::try_from(msg_len).map_err(|_| corrupt("negative message length".into()))?;
            if msg_end > meta.len() {
                return Err(corrupt("message header overruns its block".into()));
            }
            let message = root_as_message(&meta[prefix..msg_end]).map_err(|e| corrupt(format!("message: {e}")))?;
            let batch = message
                .header_as_record_batch()
                .ok_or_else(|| corrupt("block is not a record batch".into()))?;
            batch_starts.push(rows);
            rows += usize::try_from(batch.length()).map_err(|_| corrupt("negative batch length".into()))?;
            touched += meta.len() as u64;
        }
        batch_starts.push(rows);

        stats.files_opened.fetch_add(1, Ordering::Relaxed);
        stats.footer_bytes.fetch_add(touched, Ordering::Relaxed);
        Ok(IpcFile { path, buffer, schema, blocks, batch_starts, decoder, first_column, stats })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn schema(&self) -> &SchemaRef {
        &self.schema
    }

    pub fn metadata(&self) -> &Metadata {
        self.schema.metadata()
    }

    pub fn num_rows(&self) -> usize {
        *self.batch_starts.last().unwrap()
    }

    pub fn num_batches(&self) -> usize {
        self.blocks.len()
    }

    pub fn file_len(&self) -> usize {
        self.buffer.len()
    }

    /// Mapped byte range of the file, for zero-copy checks.
    pub fn mapped_range(&self) -> std::ops::Range<usize> {
        let start = self.buffer.as_ptr() as usize;
        start..start + self.buffer.len()
    }

    pub fn batch_start(&self, batch: usize) -> usize {
        self.batch_starts[batch]
    }

    /// Batch index and in-batch offset of `row`.
    pub fn locate(&self, row: usize) -> Option<(usize, usize)> {
        if row >= self.num_rows() {
            return None;
        }
        let batch = self.batch_starts.partition_point(|&s| s <= row) - 1;
        Some((batch, row - self.batch_starts[batch]))
    }

    fn decode(&self, decoder: &FileDecoder, i: usize) -> Result<RecordBatch> {
        let block = &self.blocks[i];
        let block_len = block.metaDataLength() as usize + block.bodyLength() as usize;
        let data = self.buffer.slice_with_length(block.offset() as usize, block_len);
        self.stats.bytes_decoded.fetch_add(block_len as u64, Ordering::Relaxed);
        decoder
            .read_record_batch(block, &data)
            .map_err(|e| Error::corrupt(&self.path, e))?
            .ok_or_else(|| Error::corrupt(&self.path, format!("batch {i} is empty")))
    }

    /// Decodes all columns of batch `i`.
    pub fn read_batch(&self, i: usize) -> Result<RecordBatch> {
        self.stats.record_batches.fetch_add(1, Ordering::Relaxed);
        self.decode(&self.decoder, i)
    }

    /// Decodes only the first column (the timestamp key) of batch `i`.
    pub fn read_first_column(&self, i: usize) -> Result<RecordBatch> {
        self.stats.index_batches.fetch_add(1, Ordering::Relaxed);
        self.decode(&self.first_column, i)
    }

    /// Decodes every batch with all columns, counted as index reads.
    pub fn read_all_index(&self) -> Result<Vec<RecordBatch>> {
        (0..self.num_batches())
            .map(|i| {
                self.stats.index_batches.fetch_add(1, Ordering::Relaxed);
                self.decode(&self.decoder, i)
            })
            .collect()
    }
}
