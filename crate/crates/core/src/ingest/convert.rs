use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::parser::ParsedLog;
use crate::error::{Error, IoContext, Result};
use crate::geom::{Se3, TimeDelta, TimePoint};
use crate::log::{BoxDetection, BoxFrame, EventStream, LogWriter, Modality, StorageMode, StreamRecords};
use crate::log::open_log;
use crate::map::{load_map, write_map, MapScope, MapStore};
use super::parser::SourceMap;
use crate::sync::{SyncConfig, SyncTable};

pub const MAP_FILE: &str = "map.arrow";
/// Directory (beside the log directories) holding dataset-wide maps.
pub const SHARED_MAP_DIR: &str = "maps";

#[derive(Debug, Clone, Default)]
pub struct ConvertOptions {
    pub mode: StorageMode,
    /// Upsample the box stream to this rate before writing.
    pub interpolate_boxes_hz: Option<f64>,
    /// Sync table to persist; defaults to [`default_sync_config`].
    pub sync: Option<SyncConfig>,
}

/// Keyframes of the box stream, else of the ego stream, else of the first stream.
pub fn default_sync_config(streams: &[EventStream]) -> Option<SyncConfig> {
    let has = |m: &Modality| streams.iter().any(|s| &s.modality == m && !s.is_empty());
    [Modality::Boxes, Modality::EgoState]
        .into_iter()
        .find(|m| has(m))
        .or_else(|| streams.iter().find(|s| !s.is_empty()).map(|s| s.modality.clone()))
        .map(SyncConfig::keyframes)
}

/// Timestamps between consecutive keyframes so the box stream runs at roughly
/// `hz`; the keyframes themselves are kept.
fn upsampled_times(keys: &[TimePoint], hz: f64) -> Vec<TimePoint> {
    let period = TimeDelta::from_hz(hz).micros().max(1);
    let mut out = Vec::new();
    for w in keys.windows(2) {
        let (a, b) = (w[0].micros(), w[1].micros());
        let m = (((b - a) as f64 / period as f64).round() as i64).max(1);
        out.extend((0..m).map(|k| TimePoint::from_micros(a + ((b - a) as f64 * k as f64 / m as f64).round() as i64)));
    }
    out.extend(keys.last());
    out.dedup();
    out
}

fn lerp3(a: [f64; 3], b: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s, a[2] + (b[2] - a[2]) * s]
}

/// Upsamples annotated box frames to `hz`: linear position, extent and velocity,
/// spherical-linear rotation between consecutive observations of a track. Tracks are
/// never extrapolated past their first or last observation.
pub fn interpolate_boxes(frames: &[BoxFrame], hz: f64) -> Vec<BoxFrame> {
    let keys: Vec<TimePoint> = frames.iter().map(|f| f.timestamp).collect();
    let mut tracks: BTreeMap<&str, Vec<(TimePoint, &BoxDetection)>> = BTreeMap::new();
    for f in frames {
        for b in &f.boxes {
            tracks.entry(b.track_id.as_str()).or_default().push((f.timestamp, b));
        }
    }
    let mut key_iter = frames.iter().peekable();
    upsampled_times(&keys, hz)
        .into_iter()
        .map(|t| {
            if let Some(f) = key_iter.next_if(|f| f.timestamp == t) {
                return f.clone();
            }
            let boxes = tracks
                .values()
                .filter_map(|obs| {
                    let i = obs.partition_point(|(ot, _)| *ot <= t);
                    if i == 0 || i == obs.len() {
                        return None;
                    }
                    let ((ta, a), (tb, b)) = (obs[i - 1], obs[i]);
                    let s = (t - ta).micros() as f64 / (tb - ta).micros() as f64;
                    Some(BoxDetection {
                        track_id: a.track_id.clone(),
                        raw_label: a.raw_label.clone(),
                        pose: Se3::new(lerp3(a.pose.translation, b.pose.translation, s), a.pose.rotation.slerp(&b.pose.rotation, s)),
                        extent: lerp3(a.extent, b.extent, s),
                        velocity: a.velocity.zip(b.velocity).map(|(va, vb)| lerp3(va, vb, s)),
                    })
                })
                .collect();
            BoxFrame { timestamp: t, boxes }
        })
        .collect()
}

/// Resolves a `--source` argument: a local directory or a `file://` URL. Remote
/// URLs are recognised but not fetched.
pub fn fetch_source(source: &str) -> Result<PathBuf> {
    if source.starts_with("http://") || source.starts_with("https://") || source.starts_with("s3://") {
        return Err(Error::FetchUnsupported(source.to_string()));
    }
    let path = PathBuf::from(source.strip_prefix("file://").unwrap_or(source));
    if !path.is_dir() {
        return Err(Error::SourceNotFound(path));
    }
    Ok(path)
}

/// Writes a parsed log to `out_dir/<log_id>`: streams, map and the default sync
/// table. Output is assembled in a temporary directory and moved into place, so a
/// failed conversion leaves no partial log and a repeated one yields identical bytes.
pub fn convert(log: &ParsedLog, out_dir: &Path, opts: &ConvertOptions) -> Result<PathBuf> {
    log.metadata.validate()?;
    std::fs::create_dir_all(out_dir).at(out_dir)?;
    let id = &log.metadata.log_id;
    let final_dir = out_dir.join(id);
    let tmp = out_dir.join(format!(".{id}.tmp-{}", std::process::id()));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).at(&tmp)?;
    }
    let result = convert_into(log, out_dir, &tmp, opts);
    if let Err(e) = result {
        let _ = std::fs::remove_dir_all(&tmp);
        return Err(e);
    }
    if final_dir.exists() {
        std::fs::remove_dir_all(&final_dir).at(&final_dir)?;
    }
    std::fs::rename(&tmp, &final_dir).at(&final_dir)?;
    log::info!("converted {id} into {}", final_dir.display());
    Ok(final_dir)
}

fn convert_into(log: &ParsedLog, out_dir: &Path, tmp: &Path, opts: &ConvertOptions) -> Result<()> {
    let mut metadata = log.metadata.clone();
    let mut streams = log.streams.clone();
    if let Some(hz) = opts.interpolate_boxes_hz {
        if !(hz.is_finite() && hz > 0.0) {
            return Err(Error::InvalidRecord { modality: "boxes".into(), reason: format!("interpolation rate {hz} must be positive") });
        }
        for s in &mut streams {
            if let StreamRecords::Boxes(frames) = &s.records {
                *s = EventStream::new(Modality::Boxes, StreamRecords::Boxes(interpolate_boxes(frames, hz)))?;
            }
        }
    }
    std::fs::create_dir_all(tmp).at(tmp)?;

    if let Some(map) = &log.map {
        let store = MapStore::new(map.objects.clone(), map.scope)?;
        let problems = store.validate()?;
        for p in &problems {
            log::warn!("map of {}: {p}", metadata.log_id);
        }
        match map.scope {
            MapScope::PerLog => {
                write_map(&store, &tmp.join(MAP_FILE))?;
                metadata.map_ref = Some(MAP_FILE.to_string());
            }
            MapScope::DatasetWide => {
                let dir = out_dir.join(SHARED_MAP_DIR);
                std::fs::create_dir_all(&dir).at(&dir)?;
                let name = format!("{}.arrow", map.name);
                let staged = dir.join(format!(".{name}.tmp-{}", std::process::id()));
                write_map(&store, &staged)?;
                std::fs::rename(&staged, dir.join(&name)).at(dir.join(&name))?;
                metadata.map_ref = Some(format!("../{SHARED_MAP_DIR}/{name}"));
            }
        }
    }

    let mut writer = LogWriter::new(tmp, opts.mode);
    if let Some(base) = &log.payload_base {
        writer = writer.payload_base(base);
    }
    writer.write(&streams, &metadata)?;

    if let Some(config) = opts.sync.clone().or_else(|| default_sync_config(&streams)) {
        let times: Vec<(Modality, Vec<TimePoint>)> = streams.iter().map(|s| (s.modality.clone(), s.records.timestamps())).collect();
        let view: BTreeMap<Modality, &[TimePoint]> = times.iter().map(|(m, t)| (m.clone(), t.as_slice())).collect();
        SyncTable::build(&view, &config)?.write(tmp)?;
    }
    Ok(())
}

/// Reads a converted log back into parser form, the inverse of [`convert`]. External
/// payload paths stay relative to the log directory.
pub fn read_converted(dir: &Path) -> Result<ParsedLog> {
    let handle = open_log(dir)?;
    let mut metadata = handle.metadata().clone();
    let map = match metadata.map_ref.take() {
        Some(r) => {
            let path = dir.join(&r);
            let store = load_map(&path)?;
            let objects = store.objects()?.into_iter().cloned().collect();
            let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("map").to_string();
            Some(SourceMap { objects, scope: store.scope(), name })
        }
        None => None,
    };
    Ok(ParsedLog { metadata, streams: handle.read_all()?, map, payload_base: Some(dir.to_path_buf()) })
}
