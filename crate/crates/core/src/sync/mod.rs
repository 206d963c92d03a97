//! Timestamp matching and sync tables.

mod matching;
mod table;

pub use matching::{match_timestamp, resample_grid, window_indices, MatchCriteria, MatchMode};
pub use table::{build_sync_table, load_sync_table, DefaultTolerance, SyncConfig, SyncReference, SyncTable};
