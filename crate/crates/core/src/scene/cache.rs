use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use lru::LruCache;

use crate::error::{Error, Result};
use crate::log::{open_log_with_stats, LogHandle, ReadStats};
use crate::map::{load_map, MapStore};

pub const DEFAULT_LOG_CACHE_CAPACITY: usize = 32;
pub const DEFAULT_MAP_CACHE_CAPACITY: usize = 8;

/// Hit, miss and eviction counts of a cache.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct CacheCounters {
    pub hits: u64,
    pub misses: u64,
    pub evictions: u64,
}

#[derive(Debug, Default)]
struct Counters {
    hits: AtomicU64,
    misses: AtomicU64,
    evictions: AtomicU64,
}

impl Counters {
    fn snapshot(&self) -> CacheCounters {
        CacheCounters {
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
            evictions: self.evictions.load(Ordering::Relaxed),
        }
    }
}

fn nonzero(capacity: usize) -> NonZeroUsize {
    NonZeroUsize::new(capacity).unwrap_or(NonZeroUsize::MIN)
}

/// Least-recently-used set of open logs keyed by directory.
///
/// A hit returns the cached handle instance. Evicted handles stay valid for as
/// long as a caller holds them; the file mappings close when the last holder drops.
#[derive(Debug)]
pub struct LogCache {
    entries: Mutex<LruCache<PathBuf, Arc<LogHandle>>>,
    stats: Arc<ReadStats>,
    counters: Counters,
}

impl LogCache {
    pub fn new(capacity: usize) -> Self {
        Self::with_stats(capacity, ReadStats::new())
    }

    /// A cache whose handles record file access in `stats`.
    pub fn with_stats(capacity: usize, stats: Arc<ReadStats>) -> Self {
        LogCache { entries: Mutex::new(LruCache::new(nonzero(capacity))), stats, counters: Counters::default() }
    }

    pub fn get(&self, dir: &Path) -> Result<Arc<LogHandle>> {
        let mut entries = self.entries.lock().expect("log cache poisoned");
        if let Some(h) = entries.get(dir) {
            self.counters.hits.fetch_add(1, Ordering::Relaxed);
            return Ok(h.clone());
        }
        self.counters.misses.fetch_add(1, Ordering::Relaxed);
        // Opening under the lock keeps the number of cached handles within capacity.
        let handle = Arc::new(open_log_with_stats(dir, self.stats.clone())?);
        if let Some((old, _)) = entries.push(dir.to_path_buf(), handle.clone()) {
            log::debug!("log cache evicted {}", old.display());
            self.counters.evictions.fetch_add(1, Ordering::Relaxed);
        }
        Ok(handle)
    }

    pub fn capacity(&self) -> usize {
        self.entries.lock().expect("log cache poisoned").cap().get()
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("log cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cached directories, most recently used first.
    pub fn keys(&self) -> Vec<PathBuf> {
        self.entries.lock().expect("log cache poisoned").iter().map(|(k, _)| k.clone()).collect()
    }

    pub fn clear(&self) {
        self.entries.lock().expect("log cache poisoned").clear();
    }

    pub fn stats(&self) -> &Arc<ReadStats> {
        &self.stats
    }

    pub fn counters(&self) -> CacheCounters {
        self.counters.snapshot()
    }
}

impl Default for LogCache {
    fn default() -> Self {
        Self::new(DEFAULT_LOG_CACHE_CAPACITY)
    }
}

/// Loaded maps keyed by canonical file path, so every log referencing the same
/// map file shares one [`MapStore`].
#[derive(Debug)]
pub struct MapCache {
    entries: Mutex<LruCache<PathBuf, Arc<MapStore>>>,
    loads: AtomicU64,
}

impl MapCache {
    pub fn new(capacity: usize) -> Self {
        MapCache { entries: Mutex::new(LruCache::new(nonzero(capacity))), loads: AtomicU64::new(0) }
    }

    pub fn get(&self, path: &Path) -> Result<Arc<MapStore>> {
        let key = std::fs::canonicalize(path).map_err(|e| Error::MapUnavailable(format!("{}: {e}", path.display())))?;
        let mut entries = self.entries.lock().expect("map cache poisoned");
        if let Some(m) = entries.get(&key) {
            return Ok(m.clone());
        }
        let store = Arc::new(load_map(&key)?);
        self.loads.fetch_add(1, Ordering::Relaxed);
        entries.put(key, store.clone());
        Ok(store)
    }

    /// Number of map files loaded from disk so far.
    pub fn load_count(&self) -> u64 {
        self.loads.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("map cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Default for MapCache {
    fn default() -> Self {
        Self::new(DEFAULT_MAP_CACHE_CAPACITY)
    }
}
