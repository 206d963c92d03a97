use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::cache::{LogCache, MapCache, DEFAULT_LOG_CACHE_CAPACITY, DEFAULT_MAP_CACHE_CAPACITY};
use super::filter::SceneFilter;
use super::view::{SceneContext, SceneView};
use crate::error::{Error, IoContext, Result};
use crate::geom::TimeDelta;
use crate::ingest::SHARED_MAP_DIR;
use crate::log::{LogHandle, Modality, ReadStats};
use crate::sync::{build_sync_table, load_sync_table, SyncConfig, SyncTable};

/// Optional file inside a split directory listing its member log ids.
pub const SPLIT_MANIFEST: &str = "manifest.json";

/// Log directories of `<data_root>/<split>`, sorted by log id.
pub fn list_split_logs(data_root: &Path, split: &str) -> Result<Vec<PathBuf>> {
    let dir = data_root.join(split);
    if split.is_empty() || split.contains(['/', '\\']) || !dir.is_dir() {
        return Err(Error::UnknownSplit(split.to_string()));
    }
    let manifest = dir.join(SPLIT_MANIFEST);
    let mut logs: Vec<PathBuf> = if manifest.is_file() {
        let ids: Vec<String> = serde_json::from_slice(&std::fs::read(&manifest).at(&manifest)?)
            .map_err(|e| Error::corrupt(&manifest, format!("expected a JSON list of log ids: {e}")))?;
        ids.iter()
            .map(|id| {
                let p = dir.join(id);
                if id.contains(['/', '\\']) || !p.is_dir() {
                    return Err(Error::corrupt(&manifest, format!("listed log `{id}` is not a directory of the split")));
                }
                Ok(p)
            })
            .collect::<Result<_>>()?
    } else {
        let mut v = Vec::new();
        for e in std::fs::read_dir(&dir).at(&dir)? {
            let e = e.at(&dir)?;
            let name = e.file_name().to_string_lossy().into_owned();
            if e.path().is_dir() && !name.starts_with('.') && name != SHARED_MAP_DIR {
                v.push(e.path());
            }
        }
        v
    };
    logs.sort();
    logs.dedup();
    Ok(logs)
}

/// Split directories under `data_root`.
pub fn list_splits(data_root: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for e in std::fs::read_dir(data_root).at(data_root)? {
        let e = e.at(data_root)?;
        let name = e.file_name().to_string_lossy().into_owned();
        if e.path().is_dir() && !name.starts_with('.') {
            out.push(name);
        }
    }
    out.sort();
    Ok(out)
}

/// Sync configuration of the scene timeline: a grid at `period` anchored at the ego
/// stream, or at the first stream of logs without ego states.
pub fn scene_sync_config(log: &LogHandle, period: TimeDelta) -> Result<SyncConfig> {
    let reference = if log.has(&Modality::EgoState) {
        Modality::EgoState
    } else {
        log.modalities().next().cloned().ok_or_else(|| Error::EmptyLog(log.dir().to_path_buf()))?
    };
    Ok(SyncConfig::resample(period, reference))
}

/// Builds scenes over a data root, sharing one log cache and one map cache
/// between all scenes it returns.
#[derive(Debug, Clone)]
pub struct SceneLoader {
    data_root: PathBuf,
    ctx: Arc<SceneContext>,
    persist_sync: bool,
}

impl SceneLoader {
    pub fn new(data_root: impl Into<PathBuf>) -> Self {
        Self::with_cache_capacity(data_root, DEFAULT_LOG_CACHE_CAPACITY)
    }

    pub fn with_cache_capacity(data_root: impl Into<PathBuf>, capacity: usize) -> Self {
        let ctx = SceneContext { logs: LogCache::new(capacity), maps: MapCache::new(DEFAULT_MAP_CACHE_CAPACITY) };
        SceneLoader { data_root: data_root.into(), ctx: Arc::new(ctx), persist_sync: false }
    }

    /// Write sync tables built at a new period next to the log for later runs.
    pub fn persist_sync_tables(mut self, persist: bool) -> Self {
        self.persist_sync = persist;
        self
    }

    pub fn data_root(&self) -> &Path {
        &self.data_root
    }

    pub fn log_cache(&self) -> &LogCache {
        &self.ctx.logs
    }

    pub fn map_cache(&self) -> &MapCache {
        &self.ctx.maps
    }

    pub fn stats(&self) -> &Arc<ReadStats> {
        self.ctx.logs.stats()
    }

    /// The log's sync table at `period`: the persisted one if present, else built
    /// from the stream timestamps.
    pub fn sync_table_at(&self, log_dir: &Path, period: TimeDelta) -> Result<SyncTable> {
        let log = self.ctx.logs.get(log_dir)?;
        let config = scene_sync_config(&log, period)?;
        if let Some(t) = load_sync_table(&log, &config.name())? {
            if t.config() == &config {
                return Ok(t);
            }
        }
        let table = build_sync_table(&log, &config)?;
        if self.persist_sync {
            table.write(log_dir)?;
        }
        Ok(table)
    }

    pub fn get_filtered_scenes(&self, filter: &SceneFilter) -> Result<Vec<SceneView>> {
        filter.validate()?;
        let splits = filter
            .split_names
            .iter()
            .map(|s| Ok((s.as_str(), list_split_logs(&self.data_root, s)?)))
            .collect::<Result<Vec<_>>>()?;
        let (history, future) = (filter.history_frames(), filter.future_frames());
        let (len, stride) = (filter.scene_length(), filter.effective_stride());

        let mut scenes = Vec::new();
        for (split, logs) in splits {
            let split: Arc<str> = Arc::from(split);
            for dir in logs {
                let sync = Arc::new(self.sync_table_at(&dir, filter.target_iteration_period)?);
                let required: Option<Vec<&[Option<u32>]>> =
                    filter.required_modalities.iter().map(|m| sync.column(m)).collect();
                let Some(required) = required else {
                    log::debug!("{} lacks a required modality", dir.display());
                    continue;
                };
                let dir = Arc::new(dir);
                let n = sync.len();
                let mut start = 0;
                while start + len <= n {
                    let frames = start..start + len;
                    if required.iter().all(|col| col[frames.clone()].iter().all(Option::is_some)) {
                        scenes.push(SceneView {
                            log_dir: dir.clone(),
                            split: split.clone(),
                            sync: sync.clone(),
                            anchor: start + history,
                            history,
                            future,
                            ctx: self.ctx.clone(),
                        });
                    }
                    start += stride;
                }
            }
        }
        if filter.shuffle {
            scenes.shuffle(&mut ChaCha8Rng::seed_from_u64(filter.seed));
        }
        log::info!("{} scenes from {} splits", scenes.len(), filter.split_names.len());
        Ok(scenes)
    }
}

/// Scenes matching `filter` under `data_root`, with a fresh default-sized cache.
pub fn get_filtered_scenes(filter: &SceneFilter, data_root: &Path) -> Result<Vec<SceneView>> {
    SceneLoader::new(data_root).get_filtered_scenes(filter)
}
