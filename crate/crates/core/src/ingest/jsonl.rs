//! The line-delimited JSON reference source format (documented in `docs/jsonl-format.md`).
//!
//! A source log is a directory holding `log.json`, one `<modality>.jsonl` file per
//! stream and optionally a GeoJSON map and payload files. Every numeric field names
//! its unit, and every pose names the frame it is expressed in.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::parser::{DatasetParser, ParsedLog, SourceMap};
use crate::error::{Error, IoContext, Result};
use crate::geom::{CameraModel, PoseOrigin, ProjectionModel, Quaternion, Se3, TimePoint, Vec3, VehicleParameters};
use crate::log::{
    check_relative_path, BoxDetection, BoxFrame, CameraFrameRecord, Codec, EgoStateRecord, EventStream, LidarSweepRecord,
    LogMetadata, Modality, PayloadLocation, PayloadRef, StreamRecords, TrafficLightFrame, TrafficLightState,
    TrafficLightStatus,
};
use crate::map::{import_geojson, object_to_feature, MapScope};
use crate::sync::{match_timestamp, MatchCriteria};

pub const LOG_FILE: &str = "log.json";
pub const SOURCE_FORMAT: &str = "d123-jsonl";
pub const SOURCE_VERSION: u32 = 1;
pub const MAP_FILE: &str = "map.geojson";
pub const PAYLOAD_DIR: &str = "payloads";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PoseJson {
    frame: String,
    translation_m: Vec3,
    rotation_wxyz: [f64; 4],
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleJson {
    length_m: f64,
    width_m: f64,
    height_m: f64,
    wheelbase_m: f64,
    rear_axle_to_center_m: f64,
    pose_origin: PoseOrigin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    imu_to_rear_axle_m: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraJson {
    model: ProjectionModel,
    fx_px: f64,
    fy_px: f64,
    cx_px: f64,
    cy_px: f64,
    #[serde(default)]
    distortion: Vec<f64>,
    width_px: u32,
    height_px: u32,
    extrinsic: PoseJson,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LidarJson {
    extrinsic: PoseJson,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MapJson {
    path: String,
    scope: MapScope,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LogJson {
    format: String,
    version: u32,
    log_id: String,
    dataset: String,
    label_space: String,
    vehicle: VehicleJson,
    #[serde(default)]
    cameras: BTreeMap<String, CameraJson>,
    #[serde(default)]
    lidars: BTreeMap<String, LidarJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    map: Option<MapJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EgoLine {
    frame: String,
    translation_m: Vec3,
    rotation_wxyz: [f64; 4],
    velocity_mps: Vec3,
    acceleration_mps2: Vec3,
    yaw_rate_radps: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxJson {
    track_id: String,
    label: String,
    frame: String,
    translation_m: Vec3,
    rotation_wxyz: [f64; 4],
    extent_m: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    velocity_mps: Option<Vec3>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxesLine {
    boxes: Vec<BoxJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightJson {
    lane_id: String,
    state: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LightsLine {
    lights: Vec<LightJson>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayloadJson {
    codec: Codec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    data_b64: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame_index: Option<u32>,
}

/// Frame a source pose is expressed in.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FrameTag {
    /// Global ISO 8855 frame.
    #[default]
    Global,
    /// Body frame of the ego pose nearest in time.
    Ego,
    /// Optical frame of a camera (x right, y down, z forward).
    Camera(String),
    /// Frame of a lidar.
    Lidar(String),
}

impl FrameTag {
    pub fn parse(tag: &str) -> Option<FrameTag> {
        match tag {
            "global" => Some(FrameTag::Global),
            "ego" => Some(FrameTag::Ego),
            _ => {
                if let Some(id) = tag.strip_prefix("camera:") {
                    Some(FrameTag::Camera(id.to_string()))
                } else {
                    tag.strip_prefix("lidar:").map(|id| FrameTag::Lidar(id.to_string()))
                }
            }
        }
    }

    pub fn as_string(&self) -> String {
        match self {
            FrameTag::Global => "global".into(),
            FrameTag::Ego => "ego".into(),
            FrameTag::Camera(id) => format!("camera:{id}"),
            FrameTag::Lidar(id) => format!("lidar:{id}"),
        }
    }
}

/// Position of a line inside a source file, for error messages.
#[derive(Debug, Clone, Copy)]
struct At<'a> {
    path: &'a Path,
    line: usize,
}

impl At<'_> {
    fn violation(&self, reason: impl ToString) -> Error {
        Error::SchemaViolation { path: self.path.to_path_buf(), line: self.line, reason: reason.to_string() }
    }

    fn unknown_frame(&self, tag: &str) -> Error {
        Error::UnknownFrameTag { path: self.path.to_path_buf(), line: self.line, tag: tag.to_string() }
    }

    fn quaternion(&self, q: [f64; 4]) -> Result<Quaternion> {
        Quaternion::from_wxyz(q).map_err(|e| self.violation(e))
    }

    fn pose(&self, translation: Vec3, rotation: [f64; 4]) -> Result<Se3> {
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(self.violation("translation must be finite"));
        }
        Ok(Se3::new(translation, self.quaternion(rotation)?))
    }

    fn body_pose(&self, p: &PoseJson) -> Result<Se3> {
        if p.frame != "body" {
            return Err(self.unknown_frame(&p.frame));
        }
        self.pose(p.translation_m, p.rotation_wxyz)
    }
}

/// Pulls `<prefix>_us`, `<prefix>_ms` or `<prefix>_s` out of `obj`; exactly one must be present.
fn take_time(obj: &mut Map<String, Value>, prefix: &str, at: At) -> Result<TimePoint> {
    let us = obj.remove(&format!("{prefix}_us"));
    let ms = obj.remove(&format!("{prefix}_ms"));
    let s = obj.remove(&format!("{prefix}_s"));
    let t = match (us, ms, s) {
        (Some(v), None, None) => v.as_i64().ok_or_else(|| at.violation(format!("`{prefix}_us` must be an integer")))?,
        (None, Some(v), None) => scaled(&v, 1e3).ok_or_else(|| at.violation(format!("`{prefix}_ms` must be a number")))?,
        (None, None, Some(v)) => scaled(&v, 1e6).ok_or_else(|| at.violation(format!("`{prefix}_s` must be a number")))?,
        (None, None, None) => return Err(at.violation(format!("missing `{prefix}_us`, `{prefix}_ms` or `{prefix}_s`"))),
        _ => return Err(at.violation(format!("more than one unit given for `{prefix}`"))),
    };
    Ok(TimePoint::from_micros(t))
}

fn scaled(v: &Value, to_micros: f64) -> Option<i64> {
    let x = v.as_f64()? * to_micros;
    (x.is_finite() && x.abs() < 9.0e18).then(|| x.round() as i64)
}

/// Lines of a JSONL file with the time fields extracted; blank lines are skipped.
fn read_lines<T: DeserializeOwned>(path: &Path, time_keys: &[&str]) -> Result<Vec<(usize, Vec<TimePoint>, T)>> {
    let file = File::open(path).at(path)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.at(path)?;
        let at = At { path, line: i + 1 };
        if line.trim().is_empty() {
            continue;
        }
        let mut obj = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(m)) => m,
            Ok(_) => return Err(at.violation("line is not a JSON object")),
            Err(e) => return Err(at.violation(e)),
        };
        let times = time_keys.iter().map(|k| take_time(&mut obj, k, at)).collect::<Result<Vec<_>>>()?;
        let value = serde_json::from_value(Value::Object(obj)).map_err(|e| at.violation(e))?;
        out.push((i + 1, times, value));
    }
    Ok(out)
}

fn check_monotonic(path: &Path, lines: &[(usize, Vec<TimePoint>, impl Sized)]) -> Result<()> {
    for w in lines.windows(2) {
        if w[1].1[0] <= w[0].1[0] {
            return Err(Error::NonMonotonicTimestamps { path: path.to_path_buf(), line: w[1].0, timestamp: w[1].1[0] });
        }
    }
    Ok(())
}

fn parse_metadata(path: &Path) -> Result<(LogMetadata, Option<MapJson>)> {
    let text = std::fs::read_to_string(path).at(path)?;
    let j: LogJson = serde_json::from_str(&text)
        .map_err(|e| Error::SchemaViolation { path: path.to_path_buf(), line: e.line(), reason: e.to_string() })?;
    let at = At { path, line: 1 };
    if j.format != SOURCE_FORMAT || j.version != SOURCE_VERSION {
        return Err(at.violation(format!("expected format `{SOURCE_FORMAT}` version {SOURCE_VERSION}")));
    }
    let v = &j.vehicle;
    let mut vehicle =
        VehicleParameters::new(v.length_m, v.width_m, v.height_m, v.wheelbase_m, v.rear_axle_to_center_m, v.pose_origin)
            .map_err(|e| at.violation(e))?;
    vehicle.imu_to_rear_axle = v.imu_to_rear_axle_m;
    let mut cameras = BTreeMap::new();
    for (id, c) in &j.cameras {
        let cam = CameraModel::new(
            c.model,
            [c.fx_px, c.fy_px, c.cx_px, c.cy_px],
            c.distortion.clone(),
            c.width_px,
            c.height_px,
            at.body_pose(&c.extrinsic)?,
        )
        .map_err(|e| at.violation(format!("camera `{id}`: {e}")))?;
        cameras.insert(id.clone(), cam);
    }
    let mut lidars = BTreeMap::new();
    for (id, l) in &j.lidars {
        lidars.insert(id.clone(), at.body_pose(&l.extrinsic)?);
    }
    let metadata = LogMetadata {
        log_id: j.log_id,
        dataset: j.dataset,
        vehicle,
        cameras,
        lidars,
        map_ref: None,
        label_space: j.label_space,
    };
    metadata.validate().map_err(|e| at.violation(e))?;
    Ok((metadata, j.map))
}

/// Resolves a pose given in `frame` to the global frame.
struct FrameResolver<'a> {
    metadata: &'a LogMetadata,
    ego: &'a [EgoStateRecord],
    ego_times: Vec<TimePoint>,
}

impl<'a> FrameResolver<'a> {
    fn new(metadata: &'a LogMetadata, ego: &'a [EgoStateRecord]) -> Self {
        FrameResolver { metadata, ego, ego_times: ego.iter().map(|r| r.timestamp).collect() }
    }

    fn ego_pose(&self, t: TimePoint) -> Option<&Se3> {
        match_timestamp(&self.ego_times, t, &MatchCriteria::nearest()).map(|i| &self.ego[i].pose)
    }

    /// Pose of `frame` in the global frame at time `t`; `None` if the frame is unknown
    /// or no ego pose exists.
    fn frame_to_global(&self, frame: &FrameTag, t: TimePoint) -> std::result::Result<Se3, String> {
        let sensor = match frame {
            FrameTag::Global => return Ok(Se3::IDENTITY),
            FrameTag::Ego => Se3::IDENTITY,
            FrameTag::Camera(id) => {
                self.metadata.cameras.get(id).ok_or_else(|| format!("unknown camera `{id}`"))?.extrinsic
            }
            FrameTag::Lidar(id) => *self.metadata.lidars.get(id).ok_or_else(|| format!("unknown lidar `{id}`"))?,
        };
        let ego = self.ego_pose(t).ok_or("frame needs an ego_state stream")?;
        Ok(ego.compose(&sensor))
    }
}

fn parse_ego(path: &Path) -> Result<Vec<EgoStateRecord>> {
    let lines = read_lines::<EgoLine>(path, &["timestamp"])?;
    check_monotonic(path, &lines)?;
    lines
        .into_iter()
        .map(|(line, t, l)| {
            let at = At { path, line };
            match FrameTag::parse(&l.frame) {
                Some(FrameTag::Global) => {}
                Some(_) => return Err(at.violation("ego poses must be given in the `global` frame")),
                None => return Err(at.unknown_frame(&l.frame)),
            }
            let finite = l.velocity_mps.iter().chain(&l.acceleration_mps2).all(|v| v.is_finite());
            if !finite || !l.yaw_rate_radps.is_finite() {
                return Err(at.violation("non-finite kinematics"));
            }
            Ok(EgoStateRecord {
                timestamp: t[0],
                pose: at.pose(l.translation_m, l.rotation_wxyz)?,
                velocity_body: l.velocity_mps,
                acceleration_body: l.acceleration_mps2,
                angular_velocity_z: l.yaw_rate_radps,
            })
        })
        .collect()
}

fn parse_boxes(path: &Path, frames: &FrameResolver) -> Result<Vec<BoxFrame>> {
    let lines = read_lines::<BoxesLine>(path, &["timestamp"])?;
    check_monotonic(path, &lines)?;
    lines
        .into_iter()
        .map(|(line, t, l)| {
            let at = At { path, line };
            let boxes = l
                .boxes
                .into_iter()
                .map(|b| {
                    let tag = FrameTag::parse(&b.frame).ok_or_else(|| at.unknown_frame(&b.frame))?;
                    if b.track_id.is_empty() || b.label.is_empty() {
                        return Err(at.violation("track_id and label must be non-empty"));
                    }
                    if !b.extent_m.iter().all(|e| e.is_finite() && *e > 0.0) {
                        return Err(at.violation(format!("extent components must be positive, got {:?}", b.extent_m)));
                    }
                    let to_global = frames.frame_to_global(&tag, t[0]).map_err(|e| at.violation(e))?;
                    let local = at.pose(b.translation_m, b.rotation_wxyz)?;
                    Ok(BoxDetection {
                        track_id: b.track_id,
                        raw_label: b.label,
                        pose: to_global.compose(&local),
                        extent: b.extent_m,
                        velocity: b.velocity_mps.map(|v| to_global.rotation.rotate(v)),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(BoxFrame { timestamp: t[0], boxes })
        })
        .collect()
}

fn parse_lights(path: &Path) -> Result<Vec<TrafficLightFrame>> {
    let lines = read_lines::<LightsLine>(path, &["timestamp"])?;
    check_monotonic(path, &lines)?;
    lines
        .into_iter()
        .map(|(line, t, l)| {
            let at = At { path, line };
            let lights = l
                .lights
                .into_iter()
                .map(|x| {
                    let state = TrafficLightState::parse(&x.state)
                        .ok_or_else(|| at.violation(format!("unknown traffic light state `{}`", x.state)))?;
                    Ok(TrafficLightStatus { lane_id: x.lane_id, state })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(TrafficLightFrame { timestamp: t[0], lights })
        })
        .collect()
}

fn payload(p: PayloadJson, at: At) -> Result<PayloadRef> {
    match (p.path, p.data_b64) {
        (Some(path), None) => {
            check_relative_path(Path::new(&path)).map_err(|e| at.violation(e))?;
            PayloadRef::external(path, p.codec).map_err(|e| at.violation(e))
        }
        (None, Some(b)) => {
            let bytes = B64.decode(b).map_err(|e| at.violation(format!("data_b64: {e}")))?;
            PayloadRef::inline(bytes, p.codec).map_err(|e| at.violation(e))
        }
        _ => Err(at.violation("payload needs exactly one of `path` or `data_b64`")),
    }
}

fn parse_camera(path: &Path, id: &str) -> Result<Vec<CameraFrameRecord>> {
    let lines = read_lines::<PayloadJson>(path, &["timestamp"])?;
    check_monotonic(path, &lines)?;
    lines
        .into_iter()
        .map(|(line, t, p)| {
            let frame_index = p.frame_index;
            Ok(CameraFrameRecord {
                timestamp: t[0],
                camera_id: id.to_string(),
                payload: payload(p, At { path, line })?,
                frame_index,
            })
        })
        .collect()
}

fn parse_lidar(path: &Path, id: &str) -> Result<Vec<LidarSweepRecord>> {
    let lines = read_lines::<PayloadJson>(path, &["timestamp_start", "timestamp_end"])?;
    check_monotonic(path, &lines)?;
    lines
        .into_iter()
        .map(|(line, t, p)| {
            let at = At { path, line };
            if t[1] < t[0] {
                return Err(at.violation("timestamp_end precedes timestamp_start"));
            }
            if p.frame_index.is_some() {
                return Err(at.violation("lidar sweeps have no frame_index"));
            }
            Ok(LidarSweepRecord { timestamp_start: t[0], timestamp_end: t[1], lidar_id: id.to_string(), payload: payload(p, at)? })
        })
        .collect()
}

/// Parses one source log directory.
pub fn parse_jsonl_source(dir: &Path) -> Result<ParsedLog> {
    if !dir.is_dir() {
        return Err(Error::SourceNotFound(dir.to_path_buf()));
    }
    let (metadata, map_json) = parse_metadata(&dir.join(LOG_FILE))?;

    let mut files: BTreeMap<Modality, PathBuf> = BTreeMap::new();
    for entry in std::fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        if path.extension().is_some_and(|e| e == "jsonl") {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
            let m: Modality = stem.parse()?;
            let known = match &m {
                Modality::Camera(id) => metadata.cameras.contains_key(id),
                Modality::Lidar(id) => metadata.lidars.contains_key(id),
                _ => true,
            };
            if !known {
                return Err(Error::UnknownSensorId(m.sensor_id().unwrap_or_default().to_string()));
            }
            files.insert(m, path);
        }
    }

    let ego = match files.get(&Modality::EgoState) {
        Some(p) => parse_ego(p)?,
        None => Vec::new(),
    };
    let resolver = FrameResolver::new(&metadata, &ego);
    let mut streams = Vec::with_capacity(files.len());
    for (m, path) in &files {
        let records = match m {
            Modality::EgoState => StreamRecords::EgoState(ego.clone()),
            Modality::Boxes => StreamRecords::Boxes(parse_boxes(path, &resolver)?),
            Modality::TrafficLights => StreamRecords::TrafficLights(parse_lights(path)?),
            Modality::Camera(id) => StreamRecords::Camera(parse_camera(path, id)?),
            Modality::Lidar(id) => StreamRecords::Lidar(parse_lidar(path, id)?),
        };
        streams.push(EventStream::new(m.clone(), records)?);
    }

    let map = match map_json {
        Some(mj) => {
            let rel = Path::new(&mj.path);
            check_relative_path(rel)?;
            let store = import_geojson(&dir.join(rel), mj.scope)?;
            let name = mj.name.unwrap_or_else(|| match mj.scope {
                MapScope::PerLog => "map".to_string(),
                MapScope::DatasetWide => rel.file_stem().and_then(|s| s.to_str()).unwrap_or("map").to_string(),
            });
            Some(SourceMap { objects: store.objects()?.into_iter().cloned().collect(), scope: mj.scope, name })
        }
        None => None,
    };
    log::debug!("parsed source {} ({} streams)", dir.display(), streams.len());
    Ok(ParsedLog { metadata, streams, map, payload_base: Some(dir.to_path_buf()) })
}

/// A source root: either one log directory or a directory of log directories.
#[derive(Debug, Clone)]
pub struct JsonlParser {
    root: PathBuf,
}

impl JsonlParser {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        JsonlParser { root: root.into() }
    }

    fn is_single(&self) -> bool {
        self.root.join(LOG_FILE).is_file()
    }
}

impl DatasetParser for JsonlParser {
    fn name(&self) -> &str {
        "jsonl"
    }

    fn log_ids(&self) -> Result<Vec<String>> {
        if !self.root.is_dir() {
            return Err(Error::SourceNotFound(self.root.clone()));
        }
        if self.is_single() {
            return Ok(vec![self.root.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()]);
        }
        let mut ids = Vec::new();
        for entry in std::fs::read_dir(&self.root).at(&self.root)? {
            let path = entry.at(&self.root)?.path();
            if path.join(LOG_FILE).is_file() {
                ids.push(path.file_name().unwrap().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    fn parse_log(&self, log_id: &str) -> Result<ParsedLog> {
        if self.is_single() {
            parse_jsonl_source(&self.root)
        } else {
            parse_jsonl_source(&self.root.join(log_id))
        }
    }
}

/// How [`write_jsonl_source`] lays out its output.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct JsonlWriteOptions {
    /// Frame box poses are written in.
    pub box_frame: FrameTag,
    /// Inline payloads as base64 instead of writing payload files.
    pub inline_payloads: bool,
}

fn pose_json(frame: &str, p: &Se3) -> PoseJson {
    PoseJson { frame: frame.to_string(), translation_m: p.translation, rotation_wxyz: p.rotation.wxyz() }
}

fn with_time(value: impl Serialize, times: &[(&str, TimePoint)]) -> Result<String> {
    let Value::Object(body) = serde_json::to_value(value)? else { unreachable!("records serialize to objects") };
    let mut obj = Map::new();
    for (k, t) in times {
        obj.insert(format!("{k}_us"), Value::from(t.micros()));
    }
    obj.extend(body);
    Ok(serde_json::to_string(&Value::Object(obj))?)
}

struct LineWriter {
    path: PathBuf,
    out: BufWriter<File>,
}

impl LineWriter {
    fn create(path: PathBuf) -> Result<Self> {
        let out = BufWriter::new(File::create(&path).at(&path)?);
        Ok(LineWriter { path, out })
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}").at(&self.path)
    }

    fn finish(mut self) -> Result<()> {
        self.out.flush().at(&self.path)
    }
}

/// Writes `log` in the JSONL source format. Inverse of [`parse_jsonl_source`].
pub fn write_jsonl_source(log: &ParsedLog, dir: &Path, opts: &JsonlWriteOptions) -> Result<()> {
    std::fs::create_dir_all(dir).at(dir)?;
    let md = &log.metadata;
    let v = &md.vehicle;
    let map = log.map.as_ref().map(|m| {
        let path = match m.scope {
            MapScope::PerLog => MAP_FILE.to_string(),
            MapScope::DatasetWide => format!("{}.geojson", m.name),
        };
        (path, m)
    });
    let header = LogJson {
        format: SOURCE_FORMAT.into(),
        version: SOURCE_VERSION,
        log_id: md.log_id.clone(),
        dataset: md.dataset.clone(),
        label_space: md.label_space.clone(),
        vehicle: VehicleJson {
            length_m: v.length,
            width_m: v.width,
            height_m: v.height,
            wheelbase_m: v.wheelbase,
            rear_axle_to_center_m: v.rear_axle_to_center,
            pose_origin: v.pose_origin,
            imu_to_rear_axle_m: v.imu_to_rear_axle,
        },
        cameras: md
            .cameras
            .iter()
            .map(|(id, c)| {
                let cam = CameraJson {
                    model: c.model,
                    fx_px: c.fx,
                    fy_px: c.fy,
                    cx_px: c.cx,
                    cy_px: c.cy,
                    distortion: c.distortion.clone(),
                    width_px: c.width,
                    height_px: c.height,
                    extrinsic: pose_json("body", &c.extrinsic),
                };
                (id.clone(), cam)
            })
            .collect(),
        lidars: md.lidars.iter().map(|(id, e)| (id.clone(), LidarJson { extrinsic: pose_json("body", e) })).collect(),
        map: map.as_ref().map(|(path, m)| MapJson {
            path: path.clone(),
            scope: m.scope,
            name: (m.scope == MapScope::DatasetWide).then(|| m.name.clone()),
        }),
    };
    let log_path = dir.join(LOG_FILE);
    std::fs::write(&log_path, serde_json::to_string_pretty(&header)? + "\n").at(&log_path)?;

    let ego: &[EgoStateRecord] = log
        .streams
        .iter()
        .find_map(|s| match &s.records {
            StreamRecords::EgoState(v) => Some(v.as_slice()),
            _ => None,
        })
        .unwrap_or(&[]);
    let resolver = FrameResolver::new(md, ego);
    let base = log.payload_base.as_deref().unwrap_or(dir);

    for s in &log.streams {
        let mut w = LineWriter::create(dir.join(format!("{}.jsonl", s.modality)))?;
        let payload_json = |row: usize, p: &PayloadRef, frame_index: Option<u32>| -> Result<PayloadJson> {
            if opts.inline_payloads {
                let bytes = match &p.location {
                    PayloadLocation::Inline(b) => b.clone(),
                    PayloadLocation::External(_) => p.bytes(base)?,
                };
                return Ok(PayloadJson { codec: p.codec.clone(), path: None, data_b64: Some(B64.encode(bytes)), frame_index });
            }
            let rel = format!("{PAYLOAD_DIR}/{}/{row}.{}", s.modality, p.codec);
            let target = dir.join(&rel);
            std::fs::create_dir_all(target.parent().unwrap()).at(&target)?;
            std::fs::write(&target, p.bytes(base)?).at(&target)?;
            Ok(PayloadJson { codec: p.codec.clone(), path: Some(rel), data_b64: None, frame_index })
        };
        match &s.records {
            StreamRecords::EgoState(v) => {
                for r in v {
                    let l = EgoLine {
                        frame: "global".into(),
                        translation_m: r.pose.translation,
                        rotation_wxyz: r.pose.rotation.wxyz(),
                        velocity_mps: r.velocity_body,
                        acceleration_mps2: r.acceleration_body,
                        yaw_rate_radps: r.angular_velocity_z,
                    };
                    w.line(&with_time(l, &[("timestamp", r.timestamp)])?)?;
                }
            }
            StreamRecords::Boxes(v) => {
                let tag = opts.box_frame.as_string();
                for f in v {
                    let to_local = resolver
                        .frame_to_global(&opts.box_frame, f.timestamp)
                        .map_err(|e| Error::InvalidRecord { modality: "boxes".into(), reason: e })?
                        .inverse();
                    let boxes = f
                        .boxes
                        .iter()
                        .map(|b| {
                            let local = to_local.compose(&b.pose);
                            BoxJson {
                                track_id: b.track_id.clone(),
                                label: b.raw_label.clone(),
                                frame: tag.clone(),
                                translation_m: local.translation,
                                rotation_wxyz: local.rotation.wxyz(),
                                extent_m: b.extent,
                                velocity_mps: b.velocity.map(|v| to_local.rotation.rotate(v)),
                            }
                        })
                        .collect();
                    w.line(&with_time(BoxesLine { boxes }, &[("timestamp", f.timestamp)])?)?;
                }
            }
            StreamRecords::TrafficLights(v) => {
                for f in v {
                    let lights = f
                        .lights
                        .iter()
                        .map(|l| LightJson { lane_id: l.lane_id.clone(), state: l.state.as_str().into() })
                        .collect();
                    w.line(&with_time(LightsLine { lights }, &[("timestamp", f.timestamp)])?)?;
                }
            }
            StreamRecords::Camera(v) => {
                for (row, r) in v.iter().enumerate() {
                    let p = payload_json(row, &r.payload, r.frame_index)?;
                    w.line(&with_time(p, &[("timestamp", r.timestamp)])?)?;
                }
            }
            StreamRecords::Lidar(v) => {
                for (row, r) in v.iter().enumerate() {
                    let p = payload_json(row, &r.payload, None)?;
                    w.line(&with_time(p, &[("timestamp_start", r.timestamp_start), ("timestamp_end", r.timestamp_end)])?)?;
                }
            }
        }
        w.finish()?;
    }

    if let Some((path, m)) = map {
        let features: Vec<Value> = m.objects.iter().map(object_to_feature).collect();
        let fc = serde_json::json!({"type": "FeatureCollection", "features": features});
        let target = dir.join(path);
        std::fs::write(&target, serde_json::to_vec_pretty(&fc)?).at(&target)?;
    }
    Ok(())
}
