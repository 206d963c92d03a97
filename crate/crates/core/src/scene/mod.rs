//! Scene selection over converted logs and cache-backed access to their records and maps.

mod cache;
mod filter;
mod loader;
mod view;

pub use cache::{CacheCounters, LogCache, MapCache, DEFAULT_LOG_CACHE_CAPACITY, DEFAULT_MAP_CACHE_CAPACITY};
pub use filter::SceneFilter;
pub use loader::{get_filtered_scenes, list_split_logs, list_splits, scene_sync_config, SceneLoader, SPLIT_MANIFEST};
pub use view::{EgoState, Lookup, SceneContext, SceneView};
