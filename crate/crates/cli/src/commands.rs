use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use d123_core::analytics::{build_histograms, export_csv, BinsConfig, TaxonomyMap, UnmappedPolicy};
use d123_core::geom::{TimeDelta, TimePoint};
use d123_core::ingest::{convert as convert_log, fetch_source, synthesize, ConvertOptions, DatasetParser, JsonlParser, RigPreset, SyntheticScenarioConfig};
use d123_core::log::{decode_points, export_ply, open_log, LogHandle, LogMetadata, Modality, Record, StorageMode};
use d123_core::map::{export_geojson, load_map, MapStore};
use d123_core::scene::{list_split_logs, list_splits};
use d123_core::sync::{build_sync_table, load_sync_table, match_timestamp, DefaultTolerance, MatchCriteria, MatchMode, SyncConfig};
use d123_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::{ConvertArgs, CliError, Criteria, Ctx, ExportArgs, ExportWhat, InfoArgs, Mode, QueryArgs, SourceFormat, StatsArgs, SyncArgs};

type CliResult<T = ()> = Result<T, CliError>;

fn print_json(v: &impl Serialize) -> CliResult {
    outln!("{}", serde_json::to_string_pretty(v).map_err(Error::from)?);
    Ok(())
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn tolerance(ms: Option<f64>) -> CliResult<Option<TimeDelta>> {
    match ms {
        None => Ok(None),
        Some(ms) if ms.is_finite() && ms >= 0.0 => Ok(Some(TimeDelta::from_micros((ms * 1e3).round() as i64))),
        Some(ms) => Err(usage(format!("--tolerance-ms must be a non-negative number, got {ms}"))),
    }
}

fn match_mode(c: Criteria) -> MatchMode {
    match c {
        Criteria::Nearest => MatchMode::Nearest,
        Criteria::Exact => MatchMode::Exact,
        Criteria::Forward => MatchMode::Forward,
        Criteria::Backward => MatchMode::Backward,
    }
}

fn parse_modality(s: &str) -> CliResult<Modality> {
    s.parse().map_err(|_| usage(format!("unknown modality `{s}`; expected ego_state, boxes, traffic_lights, camera_<id> or lidar_<id>")))
}

fn synthetic_config(source: &str) -> CliResult<SyntheticScenarioConfig> {
    if RigPreset::NAMES.contains(&source) {
        return Ok(SyntheticScenarioConfig::default().with_preset(source)?);
    }
    let path = Path::new(source);
    if !path.is_file() {
        return Err(usage(format!(
            "synthetic source `{source}` is neither a preset ({}) nor a scenario file",
            RigPreset::NAMES.join(", ")
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    } else {
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
    }
}

pub fn convert(ctx: &Ctx, a: ConvertArgs) -> CliResult {
    let out = a.out.or_else(|| ctx.data_root()).ok_or_else(|| usage("--out is required when no data root is configured"))?;
    let mode = match (a.mode, ctx.config.convert.mode.as_deref()) {
        (Some(Mode::External), _) | (None, None | Some("external")) => StorageMode::External,
        (Some(Mode::SelfContained), _) | (None, Some("self-contained")) => StorageMode::SelfContained,
        (None, Some(other)) => return Err(usage(format!("config convert.mode `{other}` is not external or self-contained"))),
    };
    let opts = ConvertOptions {
        mode,
        interpolate_boxes_hz: a.interpolate_boxes.or(ctx.config.convert.interpolate_boxes),
        ..Default::default()
    };
    if let Some(hz) = opts.interpolate_boxes_hz {
        if !(hz.is_finite() && hz > 0.0) {
            return Err(usage(format!("--interpolate-boxes must be a positive rate, got {hz}")));
        }
    }

    let mut written = Vec::new();
    match a.format {
        SourceFormat::Jsonl => {
            let parser = JsonlParser::new(fetch_source(&a.source)?);
            let ids = parser.log_ids()?;
            if ids.is_empty() {
                return Err(usage(format!("no logs found under {}", a.source)));
            }
            for id in ids {
                written.push(convert_log(&parser.parse_log(&id)?, &out, &opts)?);
            }
        }
        SourceFormat::Synthetic => {
            let base = synthetic_config(&a.source)?;
            if a.count == 0 {
                return Err(usage("--count must be at least 1"));
            }
            for i in 0..a.count {
                let mut cfg = base.clone();
                if let Some(s) = a.seed {
                    cfg.seed = s;
                }
                cfg.seed += i as u64;
                if let Some(d) = a.duration {
                    cfg.duration_s = d;
                }
                let id = a.log_id.clone().unwrap_or_else(|| format!("{}_{:04}", cfg.preset.name, cfg.seed));
                cfg.log_id = if a.count > 1 && a.log_id.is_some() { format!("{id}_{i}") } else { id };
                cfg.validate()?;
                let (log, _) = synthesize(&cfg)?;
                written.push(convert_log(&log, &out, &opts)?);
            }
        }
    }
    if ctx.json {
        print_json(&json!({ "logs": written }))
    } else {
        for d in &written {
            outln!("{}", d.display());
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
struct ModalityInfo {
    modality: String,
    events: usize,
    first_us: Option<i64>,
    last_us: Option<i64>,
    duration_s: f64,
    /// Inverse of the median gap between consecutive events.
    rate_hz: Option<f64>,
}

#[derive(Debug, Serialize)]
struct InfoReport {
    log_dir: PathBuf,
    metadata: Option<LogMetadata>,
    modalities: Vec<ModalityInfo>,
    sync_tables: Vec<String>,
}

fn median_gap_us(ts: &[TimePoint]) -> Option<f64> {
    let mut gaps: Vec<i64> = ts.windows(2).map(|w| w[1].micros() - w[0].micros()).collect();
    if gaps.is_empty() {
        return None;
    }
    gaps.sort_unstable();
    let n = gaps.len();
    Some(if n % 2 == 1 { gaps[n / 2] as f64 } else { (gaps[n / 2 - 1] + gaps[n / 2]) as f64 / 2.0 })
}

fn modality_info(log: &LogHandle) -> CliResult<Vec<ModalityInfo>> {
    log.streams()
        .map(|s| {
            let ts = s.timestamps()?;
            let (first, last) = (ts.first().copied(), ts.last().copied());
            Ok(ModalityInfo {
                modality: s.modality().to_string(),
                events: ts.len(),
                first_us: first.map(TimePoint::micros),
                last_us: last.map(TimePoint::micros),
                duration_s: first.zip(last).map_or(0.0, |(a, b)| (b - a).as_secs_f64()),
                rate_hz: median_gap_us(ts).filter(|g| *g > 0.0).map(|g| 1e6 / g),
            })
        })
        .collect()
}

pub fn info(ctx: &Ctx, a: InfoArgs) -> CliResult {
    let report = match open_log(&a.log_dir) {
        Ok(log) => InfoReport {
            log_dir: a.log_dir.clone(),
            metadata: Some(log.metadata().clone()),
            modalities: modality_info(&log)?,
            sync_tables: log.sync_names().map(str::to_string).collect(),
        },
        Err(Error::EmptyLog(_)) => InfoReport { log_dir: a.log_dir.clone(), metadata: None, modalities: Vec::new(), sync_tables: Vec::new() },
        Err(e) => return Err(e.into()),
    };
    if ctx.json {
        return print_json(&report);
    }
    outln!("log: {}", report.log_dir.display());
    if let Some(md) = &report.metadata {
        outln!("id: {}  dataset: {}  labels: {}", md.log_id, md.dataset, md.label_space);
        outln!("map: {}", md.map_ref.as_deref().unwrap_or("-"));
    }
    outln!("modalities: {}", report.modalities.len());
    for m in &report.modalities {
        let rate = m.rate_hz.map_or("-".to_string(), |r| format!("{r:.2} Hz"));
        outln!("  {:<24} {:>7} events  {:>9.3} s  {rate}", m.modality, m.events, m.duration_s);
    }
    if !report.sync_tables.is_empty() {
        outln!("sync tables: {}", report.sync_tables.join(", "));
    }
    Ok(())
}

pub fn sync(ctx: &Ctx, a: SyncArgs) -> CliResult {
    if a.reference.is_none() && a.rate.is_none() {
        return Err(usage("one of --reference or --rate is required"));
    }
    let log = open_log(&a.log_dir)?;
    let reference = match &a.reference {
        Some(r) => parse_modality(r)?,
        None if log.has(&Modality::EgoState) => Modality::EgoState,
        None => log.modalities().next().cloned().ok_or_else(|| Error::EmptyLog(a.log_dir.clone()))?,
    };
    log.stream(&reference)?;
    let mut config = match a.rate {
        Some(hz) if hz.is_finite() && hz > 0.0 => SyncConfig::resample(TimeDelta::from_hz(hz), reference),
        Some(hz) => return Err(usage(format!("--rate must be positive, got {hz}"))),
        None => SyncConfig::keyframes(reference),
    };
    config.default_mode = match_mode(a.criteria);
    if let Some(t) = tolerance(a.tolerance_ms)? {
        config.default_tolerance = DefaultTolerance::Fixed(t);
    }
    config.validate()?;
    let table = build_sync_table(&log, &config)?;
    let out = a.out.unwrap_or_else(|| a.log_dir.clone());
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let path = table.write(&out)?;

    let columns: BTreeMap<String, usize> =
        table.modalities().map(|m| (m.to_string(), table.column(m).map_or(0, |c| c.iter().flatten().count()))).collect();
    if ctx.json {
        return print_json(&json!({
            "name": config.name(),
            "path": path,
            "frames": table.len(),
            "matched": columns,
        }));
    }
    outln!("{} frames -> {}", table.len(), path.display());
    for (m, n) in &columns {
        outln!("  {m:<24} {n:>7} matched");
    }
    Ok(())
}

enum At {
    Timestamp(TimePoint),
    Iteration(i64),
}

fn parse_at(s: &str) -> CliResult<At> {
    if let Some(i) = s.strip_prefix("iter:") {
        return i.parse().map(At::Iteration).map_err(|_| usage(format!("bad iteration in --at `{s}`")));
    }
    s.parse().map(|us| At::Timestamp(TimePoint::from_micros(us))).map_err(|_| usage(format!("--at `{s}` is neither microseconds nor iter:<n>")))
}

pub fn query(_ctx: &Ctx, a: QueryArgs) -> CliResult {
    let at = parse_at(&a.at)?;
    let modality = parse_modality(&a.modality)?;
    let log = open_log(&a.log_dir)?;
    let stream = log.stream(&modality)?;
    let (query, row): (Value, Option<usize>) = match at {
        At::Timestamp(t) => {
            let mut criteria = MatchCriteria::new(match_mode(a.criteria));
            criteria.tolerance = tolerance(a.tolerance_ms)?;
            criteria.validate()?;
            let row = match_timestamp(stream.timestamps()?, t, &criteria)
                .ok_or_else(|| Error::NoMatchWithinTolerance { modality: modality.to_string(), timestamp: t })?;
            (json!({"timestamp_us": t.micros(), "criteria": criteria}), Some(row))
        }
        At::Iteration(i) => {
            let name = match &a.sync {
                Some(n) => n.clone(),
                None => log.sync_names().next().map(str::to_string).ok_or_else(|| usage("the log has no sync table; run `d123 sync` first"))?,
            };
            let table = load_sync_table(&log, &name)?.ok_or_else(|| usage(format!("no sync table named `{name}`")))?;
            let max = table.len() as i64 - 1;
            if i < 0 || i > max {
                return Err(Error::IterationOutOfRange { iteration: i, min: 0, max }.into());
            }
            let frame = table.frame_timestamps()[i as usize];
            (json!({"iteration": i, "sync": name, "frame_timestamp_us": frame.micros()}), table.row(i as usize, &modality))
        }
    };
    let record: Option<Record> = row.map(|r| stream.get(r)).transpose()?;
    print_json(&json!({"modality": modality.to_string(), "query": query, "row": row, "record": record}))
}

fn taxonomy(ctx: &Ctx, path: Option<&Path>, strict: bool) -> CliResult<TaxonomyMap> {
    let t = match path.or(ctx.config.stats.taxonomy.as_deref()) {
        Some(p) => TaxonomyMap::from_json_file(p)?,
        None => TaxonomyMap::builtin(),
    };
    Ok(if strict || ctx.config.stats.strict { t.with_policy(UnmappedPolicy::Error) } else { t })
}

fn split_logs(root: &Path, splits: &[String]) -> CliResult<Vec<PathBuf>> {
    let splits = if splits.is_empty() { list_splits(root)? } else { splits.to_vec() };
    let mut dirs = Vec::new();
    for s in &splits {
        dirs.extend(list_split_logs(root, s)?);
    }
    Ok(dirs)
}

pub fn stats(ctx: &Ctx, a: StatsArgs) -> CliResult {
    let root = a.data_root.or_else(|| ctx.data_root()).ok_or_else(|| usage("no data root given and D123_DATA_ROOT is not set"))?;
    let splits = if a.splits.is_empty() { ctx.config.stats.splits.clone() } else { a.splits };
    let dirs = split_logs(&root, &splits)?;
    let set = build_histograms(&dirs, &taxonomy(ctx, a.taxonomy.as_deref(), a.strict)?, &BinsConfig::default())?;
    if let Some(p) = &a.summary {
        d123_core::analytics::export_summary_json(&set, p)?;
    }
    match &a.out {
        Some(p) => export_csv(&set, p)?,
        None if ctx.json => {}
        None => {
            let mut stdout = std::io::stdout().lock();
            if let Err(e) = set.write_csv(&mut stdout).and_then(|_| stdout.flush()) {
                crate::stdout_failed(e);
            }
            return Ok(());
        }
    }
    if ctx.json {
        return print_json(&set.summary());
    }
    outln!("{} logs", dirs.len());
    for ((dataset, category), n) in &set.tracks {
        outln!("  {dataset:<16} {:<12} {n:>7} tracks", category.as_str());
    }
    Ok(())
}

fn map_of(input: &Path) -> CliResult<MapStore> {
    if input.is_file() {
        return Ok(load_map(input)?);
    }
    let log = open_log(input)?;
    let r = log.metadata().map_ref.clone().ok_or_else(|| Error::MapUnavailable(format!("log {} has no map", input.display())))?;
    Ok(load_map(&input.join(r))?)
}

fn is_log_dir(p: &Path) -> bool {
    std::fs::read_dir(p)
        .map(|rd| rd.filter_map(|e| e.ok()).any(|e| Modality::from_file_name(&e.file_name().to_string_lossy()).is_some()))
        .unwrap_or(false)
}

pub fn export(ctx: &Ctx, a: ExportArgs) -> CliResult {
    let report = match a.what {
        ExportWhat::MapGeojson => {
            let store = map_of(&a.input)?;
            export_geojson(&store, &a.out)?;
            json!({"what": "map-geojson", "out": a.out, "objects": store.len()})
        }
        ExportWhat::LidarPly => {
            let log = open_log(&a.input)?;
            let modality = match &a.lidar {
                Some(id) => Modality::Lidar(id.clone()),
                None => log
                    .modalities()
                    .find(|m| matches!(m, Modality::Lidar(_)))
                    .cloned()
                    .ok_or_else(|| Error::MissingModality("lidar".into()))?,
            };
            let stream = log.stream(&modality)?;
            if a.row >= stream.len() {
                return Err(usage(format!("--row {} out of range: {modality} has {} sweeps", a.row, stream.len())));
            }
            let Record::Lidar(sweep) = stream.get(a.row)? else { unreachable!("lidar stream yields sweeps") };
            let cloud = decode_points(&sweep.payload, log.dir())?;
            export_ply(&cloud, &a.out)?;
            json!({"what": "lidar-ply", "out": a.out, "modality": modality.to_string(), "row": a.row, "points": cloud.len()})
        }
        ExportWhat::HistogramsCsv => {
            let dirs = if is_log_dir(&a.input) { vec![a.input.clone()] } else { split_logs(&a.input, &ctx.config.stats.splits)? };
            let set = build_histograms(&dirs, &taxonomy(ctx, None, false)?, &BinsConfig::default())?;
            export_csv(&set, &a.out)?;
            json!({"what": "histograms-csv", "out": a.out, "logs": dirs.len(), "histograms": set.histograms.len()})
        }
    };
    if ctx.json {
        print_json(&report)
    } else {
        outln!("{}", a.out.display());
        Ok(())
    }
}
