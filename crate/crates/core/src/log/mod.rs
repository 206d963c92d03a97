//! Record types, payloads and the on-disk log directory format.
//!
//! A log is a directory with one Arrow IPC file per modality
//! (`ego_state.arrow`, `boxes.arrow`, `traffic_lights.arrow`, `camera_<id>.arrow`,
//! `lidar_<id>.arrow`), optional `sync_<name>.arrow` tables and, for external
//! storage, payload bytes under `blobs/<modality>/<row>.bin`.

mod columns;
mod ipc;
mod metadata;
mod modality;
mod payload;
mod reader;
mod records;
mod writer;

pub use columns::modality_fields;
pub use ipc::{IpcFile, ReadStats, ReadStatsSnapshot, ROW_GROUP_SIZE};
pub(crate) use ipc::{row_groups, write_ipc_file};
pub use metadata::*;
pub use modality::Modality;
pub use payload::{
    check_relative_path, decode_payload, export_ply, decode_points, decode_points_from_bytes, Codec, DecodedPayload,
    PayloadLocation, PayloadRef, PointCloud, POINT_RECORD_BYTES,
};
pub use reader::{open_log, open_log_with_stats, LogHandle, StreamHandle, SYNC_PREFIX, SYNC_SUFFIX};
pub use records::*;
pub use writer::{blob_path, stream_schema, write_log, LogWriter, StorageMode, BLOB_DIR, LOCK_FILE};
