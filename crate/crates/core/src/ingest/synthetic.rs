//! Deterministic synthetic scenarios with closed-form ego and agent motion.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, TAU};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::jsonl::{write_jsonl_source, JsonlWriteOptions};
use super::parser::{ParsedLog, SourceMap};
use super::templates::{grid_map, straight_road};
use crate::error::{Error, IoContext, Result};
use crate::geom::{looking_camera_extrinsic, CameraModel, PoseOrigin, Quaternion, Se3, TimePoint, VehicleParameters};
use crate::log::{
    BoxDetection, BoxFrame, CameraFrameRecord, Codec, EgoStateRecord, EventStream, LidarSweepRecord, LogMetadata,
    Modality, PayloadRef, PointCloud, StreamRecords, TrafficLightFrame, TrafficLightState, TrafficLightStatus,
};
use crate::map::{MapLayer, MapObject, MapScope};

pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";
pub const DEFAULT_START_US: i64 = 1_700_000_000_000_000;
pub const FRONT_CAMERA_ID: &str = "pcam_f0";
pub const TOP_LIDAR_ID: &str = "lidar_top";

/// Sensor rig and annotation rates of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RigPreset {
    pub name: String,
    pub cameras: u32,
    pub camera_hz: f64,
    pub lidars: u32,
    pub lidar_hz: f64,
    pub box_hz: Option<f64>,
    pub traffic_light_hz: Option<f64>,
    pub has_map: bool,
}

impl RigPreset {
    pub const NAMES: [&'static str; 9] =
        ["nuscenes", "wod_perception", "av2_sensor", "pandaset", "kitti360", "wod_motion", "nuplan", "pai_av", "carla_l3ad"];

    /// Camera/lidar counts and rates, box and traffic-light rates and map availability
    /// of the supported datasets.
    pub fn named(name: &str) -> Result<Self> {
        #[rustfmt::skip]
        let (c, ch, l, lh, b, t, m) = match name {
            "nuscenes" =>       (6, 12.0, 1, 20.0, Some(2.0), None, true),
            "wod_perception" => (5, 10.0, 5, 10.0, Some(10.0), None, true),
            "av2_sensor" =>     (9, 20.0, 2, 10.0, Some(10.0), None, true),
            "pandaset" =>       (6, 10.0, 2, 10.0, Some(10.0), None, false),
            "kitti360" =>       (4, 10.0, 1, 10.0, Some(10.0), None, true),
            "wod_motion" =>     (0, 0.0, 0, 0.0, Some(10.0), Some(10.0), true),
            "nuplan" =>         (8, 10.0, 5, 20.0, Some(20.0), Some(20.0), true),
            "pai_av" =>         (7, 30.0, 1, 10.0, Some(10.0), None, false),
            "carla_l3ad" =>     (6, 10.0, 2, 10.0, Some(10.0), Some(10.0), true),
            other => return Err(Error::InvalidRecord { modality: "preset".into(), reason: format!("unknown rig preset `{other}`") }),
        };
        Ok(RigPreset {
            name: name.to_string(),
            cameras: c,
            camera_hz: ch,
            lidars: l,
            lidar_hz: lh,
            box_hz: b,
            traffic_light_hz: t,
            has_map: m,
        })
    }

    pub fn all() -> Vec<RigPreset> {
        Self::NAMES.iter().map(|n| Self::named(n).unwrap()).collect()
    }

    pub fn camera_ids(&self) -> Vec<String> {
        (0..self.cameras).map(|i| if i == 0 { FRONT_CAMERA_ID.to_string() } else { format!("pcam_{i}") }).collect()
    }

    pub fn lidar_ids(&self) -> Vec<String> {
        (0..self.lidars).map(|i| if i == 0 { TOP_LIDAR_ID.to_string() } else { format!("lidar_{i}") }).collect()
    }
}

/// Planar pose, velocity and acceleration in the global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanarState {
    pub position: [f64; 2],
    pub yaw: f64,
    pub velocity: [f64; 2],
    pub acceleration: [f64; 2],
    pub yaw_rate: f64,
}

/// Closed-form planar trajectory, parameterised by seconds since log start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    Static { x: f64, y: f64, yaw: f64 },
    Line { x0: f64, y0: f64, heading: f64, speed: f64 },
    /// Circle around `(cx, cy)`; positive `omega` is counter-clockwise.
    Circle { cx: f64, cy: f64, radius: f64, omega: f64, phase: f64 },
}

impl Motion {
    pub fn state(&self, t: f64) -> PlanarState {
        match *self {
            Motion::Static { x, y, yaw } => {
                PlanarState { position: [x, y], yaw, velocity: [0.0; 2], acceleration: [0.0; 2], yaw_rate: 0.0 }
            }
            Motion::Line { x0, y0, heading, speed } => {
                let (s, c) = heading.sin_cos();
                PlanarState {
                    position: [x0 + speed * t * c, y0 + speed * t * s],
                    yaw: heading,
                    velocity: [speed * c, speed * s],
                    acceleration: [0.0; 2],
                    yaw_rate: 0.0,
                }
            }
            Motion::Circle { cx, cy, radius, omega, phase } => {
                let a = phase + omega * t;
                let (s, c) = a.sin_cos();
                PlanarState {
                    position: [cx + radius * c, cy + radius * s],
                    yaw: a + omega.signum() * FRAC_PI_2,
                    velocity: [-radius * omega * s, radius * omega * c],
                    acceleration: [-radius * omega * omega * c, -radius * omega * omega * s],
                    yaw_rate: omega,
                }
            }
        }
    }

    pub fn speed(&self) -> f64 {
        match *self {
            Motion::Static { .. } => 0.0,
            Motion::Line { speed, .. } => speed.abs(),
            Motion::Circle { radius, omega, .. } => radius * omega.abs(),
        }
    }
}

/// Ego trajectory. Every path starts at the origin heading along +x (lines along `heading`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EgoPath {
    Static,
    Line { speed_mps: f64, heading_rad: f64 },
    /// Counter-clockwise circle through the origin, centered at `(0, radius)`.
    Circle { radius_m: f64, speed_mps: f64 },
}

impl EgoPath {
    pub fn motion(&self) -> Motion {
        match *self {
            EgoPath::Static => Motion::Static { x: 0.0, y: 0.0, yaw: 0.0 },
            EgoPath::Line { speed_mps, heading_rad } => Motion::Line { x0: 0.0, y0: 0.0, heading: heading_rad, speed: speed_mps },
            EgoPath::Circle { radius_m, speed_mps } => {
                Motion::Circle { cx: 0.0, cy: radius_m, radius: radius_m, omega: speed_mps / radius_m, phase: -FRAC_PI_2 }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapTemplate {
    /// Straight road for line/static ego paths, grid for circles; none if the preset has no map.
    #[default]
    Auto,
    None,
    StraightRoad,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AgentConfig {
    pub count: usize,
    pub min_speed_mps: f64,
    pub max_speed_mps: f64,
    /// Fraction of moving agents on circular paths; the rest move on lines.
    pub circle_fraction: f64,
    /// Fraction of non-obstacle agents that stand still.
    pub static_fraction: f64,
    /// Agents spawn within this distance of the ego start.
    pub spawn_radius_m: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        AgentConfig {
            count: 8,
            min_speed_mps: 1.0,
            max_speed_mps: 15.0,
            circle_fraction: 0.25,
            static_fraction: 0.2,
            spawn_radius_m: 40.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticScenarioConfig {
    pub seed: u64,
    pub log_id: String,
    pub duration_s: f64,
    pub start_us: i64,
    pub preset: RigPreset,
    pub ego_hz: f64,
    pub ego_path: EgoPath,
    pub agents: AgentConfig,
    pub map_template: MapTemplate,
    /// Standard deviation of per-frame box position noise, mimicking auto-label jitter.
    pub box_noise_sigma_m: f64,
    pub lidar_points: usize,
    pub lidar_codec: Codec,
    /// Embed payloads as base64 in the source instead of writing payload files.
    pub inline_payloads: bool,
    /// Sensor streams start up to this many microseconds after the ego stream.
    pub max_sensor_phase_us: i64,
}

impl Default for SyntheticScenarioConfig {
    fn default() -> Self {
        SyntheticScenarioConfig {
            seed: 0,
            log_id: "synthetic_0000".into(),
            duration_s: 20.0,
            start_us: DEFAULT_START_US,
            preset: RigPreset::named("nuscenes").unwrap(),
            ego_hz: 20.0,
            ego_path: EgoPath::Line { speed_mps: 10.0, heading_rad: 0.0 },
            agents: AgentConfig::default(),
            map_template: MapTemplate::Auto,
            box_noise_sigma_m: 0.0,
            lidar_points: 128,
            lidar_codec: Codec::RawF32Le,
            inline_payloads: false,
            max_sensor_phase_us: 10_000,
        }
    }
}

impl SyntheticScenarioConfig {
    pub fn with_preset(mut self, name: &str) -> Result<Self> {
        self.preset = RigPreset::named(name)?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidRecord { modality: "synthetic config".into(), reason: m });
        let p = &self.preset;
        let rates = [Some(self.ego_hz), (p.cameras > 0).then_some(p.camera_hz), (p.lidars > 0).then_some(p.lidar_hz), p.box_hz, p.traffic_light_hz];
        if rates.iter().flatten().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("rates must be positive".into());
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return bad(format!("duration must be positive, got {}", self.duration_s));
        }
        if !(self.box_noise_sigma_m >= 0.0) || self.max_sensor_phase_us < 0 {
            return bad("noise and phase must be non-negative".into());
        }
        if self.agents.min_speed_mps > self.agents.max_speed_mps || self.agents.min_speed_mps < 0.0 {
            return bad("agent speed range is empty".into());
        }
        if let EgoPath::Circle { radius_m, .. } = self.ego_path {
            if !(radius_m > 0.0) {
                return bad("circle radius must be positive".into());
            }
        }
        Ok(())
    }
}

/// One annotated object with its exact trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent {
    pub track_id: String,
    pub label: String,
    pub extent: [f64; 3],
    pub motion: Motion,
}

/// Closed-form description of a generated scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub log_id: String,
    pub seed: u64,
    pub start_us: i64,
    pub duration_s: f64,
    pub ego: Motion,
    pub agents: Vec<Agent>,
    pub box_noise_sigma_m: f64,
    /// Nominal rate of every generated stream.
    pub rates_hz: BTreeMap<String, f64>,
    pub record_counts: BTreeMap<String, usize>,
}

/// Labels with typical extents; the last three never move.
const LABELS: [(&str, [f64; 3]); 10] = [
    ("car", [4.5, 1.9, 1.6]),
    ("truck", [8.0, 2.5, 3.2]),
    ("bus", [11.0, 2.6, 3.2]),
    ("pedestrian", [0.7, 0.7, 1.75]),
    ("bicycle", [1.8, 0.6, 1.4]),
    ("motorcycle", [2.2, 0.8, 1.5]),
    ("animal", [1.0, 0.5, 0.8]),
    ("traffic_cone", [0.4, 0.4, 0.7]),
    ("barrier", [2.0, 0.4, 1.0]),
    ("sign", [0.3, 0.3, 2.0]),
];
const STATIC_LABELS: usize = 3;

/// Event times of a stream at `hz`, starting `phase_us` after `start_us`, over a
/// half-open window of `duration_s`.
pub fn stream_times(start_us: i64, phase_us: i64, hz: f64, duration_s: f64) -> Vec<TimePoint> {
    let n = (duration_s * hz + 1e-9).floor() as i64;
    (0..n).map(|k| TimePoint::from_micros(start_us + phase_us + (k as f64 * 1e6 / hz).round() as i64)).collect()
}

fn secs(t: TimePoint, start_us: i64) -> f64 {
    (t.micros() - start_us) as f64 * 1e-6
}

pub fn default_vehicle() -> VehicleParameters {
    VehicleParameters::new(4.9, 2.0, 1.8, 2.9, 1.4, PoseOrigin::RearAxle).expect("valid defaults")
}

fn gen_agents(cfg: &SyntheticScenarioConfig, rng: &mut ChaCha8Rng) -> Vec<Agent> {
    let a = &cfg.agents;
    (0..a.count)
        .map(|i| {
            let li = rng.gen_range(0..LABELS.len());
            let (label, extent) = LABELS[li];
            let r = a.spawn_radius_m * rng.gen::<f64>().sqrt();
            let ang = rng.gen_range(0.0..TAU);
            let (x, y) = (r * ang.cos(), r * ang.sin());
            let yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            let speed = rng.gen_range(a.min_speed_mps..=a.max_speed_mps);
            let roll: f64 = rng.gen();
            let motion = if li >= LABELS.len() - STATIC_LABELS || roll < a.static_fraction {
                Motion::Static { x, y, yaw }
            } else if rng.gen_bool(a.circle_fraction.clamp(0.0, 1.0)) {
                let radius = rng.gen_range(10.0..40.0);
                let dir = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                Motion::Circle { cx: x, cy: y, radius, omega: dir * speed / radius, phase: yaw }
            } else {
                Motion::Line { x0: x, y0: y, heading: yaw, speed }
            };
            Agent { track_id: format!("track_{i:04}"), label: label.to_string(), extent, motion }
        })
        .collect()
}

fn gen_map(cfg: &SyntheticScenarioConfig) -> Result<Option<Vec<MapObject>>> {
    let template = match cfg.map_template {
        MapTemplate::Auto if !cfg.preset.has_map => return Ok(None),
        MapTemplate::Auto => match cfg.ego_path {
            EgoPath::Circle { .. } => MapTemplate::Grid,
            _ => MapTemplate::StraightRoad,
        },
        t => t,
    };
    Ok(match template {
        MapTemplate::None | MapTemplate::Auto => None,
        MapTemplate::StraightRoad => {
            let (travel, heading) = match cfg.ego_path {
                EgoPath::Line { speed_mps, heading_rad } => (speed_mps.abs() * cfg.duration_s, heading_rad),
                _ => (0.0, 0.0),
            };
            Some(straight_road(-100.0, travel + 200.0, 3, 2, heading)?)
        }
        MapTemplate::Grid => {
            let reach = match cfg.ego_path {
                EgoPath::Circle { radius_m, .. } => 2.0 * radius_m,
                EgoPath::Line { speed_mps, .. } => speed_mps.abs() * cfg.duration_s,
                EgoPath::Static => 0.0,
            };
            let block = 100.0;
            Some(grid_map(((reach + 50.0) / block).ceil().max(1.0) as usize, block)?)
        }
    })
}

fn light_state(t: f64, offset: f64) -> TrafficLightState {
    let c = (t + offset).rem_euclid(23.0);
    if c < 10.0 {
        TrafficLightState::Green
    } else if c < 13.0 {
        TrafficLightState::Yellow
    } else {
        TrafficLightState::Red
    }
}

fn lidar_cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    let points = (0..n)
        .map(|_| {
            let r = rng.gen_range(3.0f32..60.0);
            let a = rng.gen_range(0.0f32..std::f32::consts::TAU);
            [r * a.cos(), r * a.sin(), rng.gen_range(-1.8f32..3.0), rng.gen_range(0.0f32..=1.0)]
        })
        .collect();
    PointCloud { points }
}

/// Builds a scenario in memory, payloads inline.
pub fn synthesize(cfg: &SyntheticScenarioConfig) -> Result<(ParsedLog, GroundTruth)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = &cfg.preset;
    let start = cfg.start_us;
    let ego_motion = cfg.ego_path.motion();
    let agents = gen_agents(cfg, &mut rng);
    let map = gen_map(cfg)?;
    let phase = |rng: &mut ChaCha8Rng| if cfg.max_sensor_phase_us > 0 { rng.gen_range(0..cfg.max_sensor_phase_us) } else { 0 };

    let mut cameras = BTreeMap::new();
    let cam_ids = p.camera_ids();
    for (i, id) in cam_ids.iter().enumerate() {
        let yaw = TAU * i as f64 / cam_ids.len() as f64;
        let ext = looking_camera_extrinsic([1.5 * yaw.cos(), 0.8 * yaw.sin(), 1.6], yaw);
        cameras.insert(id.clone(), CameraModel::pinhole(1266.0, 1266.0, 816.0, 491.0, 1600, 900, ext));
    }
    let lidar_ids = p.lidar_ids();
    let lidars: BTreeMap<String, Se3> = lidar_ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let pose = if i == 0 {
                Se3::from_translation([1.0, 0.0, 1.9])
            } else {
                let a = TAU * i as f64 / lidar_ids.len() as f64;
                Se3::new([1.4 + 2.0 * a.cos(), 0.9 * a.sin(), 0.8], Quaternion::from_yaw(a))
            };
            (id.clone(), pose)
        })
        .collect();
    let metadata = LogMetadata {
        log_id: cfg.log_id.clone(),
        dataset: p.name.clone(),
        vehicle: default_vehicle(),
        cameras,
        lidars,
        map_ref: None,
        label_space: "synthetic".into(),
    };

    let mut rates = BTreeMap::new();
    let mut streams = Vec::new();

    let ego_records: Vec<EgoStateRecord> = stream_times(start, 0, cfg.ego_hz, cfg.duration_s)
        .into_iter()
        .map(|t| {
            let s = ego_motion.state(secs(t, start));
            let speed = ego_motion.speed();
            let q = Quaternion::from_yaw(s.yaw);
            // body-frame acceleration: rotate the global vector by -yaw
            let a = Quaternion::from_yaw(-s.yaw).rotate([s.acceleration[0], s.acceleration[1], 0.0]);
            EgoStateRecord {
                timestamp: t,
                pose: Se3::new([s.position[0], s.position[1], 0.0], q),
                velocity_body: [speed, 0.0, 0.0],
                acceleration_body: a,
                angular_velocity_z: s.yaw_rate,
            }
        })
        .collect();
    rates.insert(Modality::EgoState.to_string(), cfg.ego_hz);
    streams.push(EventStream::new(Modality::EgoState, StreamRecords::EgoState(ego_records))?);

    if let Some(hz) = p.box_hz {
        let noise = Normal::new(0.0, cfg.box_noise_sigma_m).expect("sigma validated");
        let ph = phase(&mut rng);
        let frames: Vec<BoxFrame> = stream_times(start, ph, hz, cfg.duration_s)
            .into_iter()
            .map(|t| {
                let boxes = agents
                    .iter()
                    .map(|a| {
                        let s = a.motion.state(secs(t, start));
                        let (nx, ny) = if cfg.box_noise_sigma_m > 0.0 {
                            (noise.sample(&mut rng), noise.sample(&mut rng))
                        } else {
                            (0.0, 0.0)
                        };
                        BoxDetection {
                            track_id: a.track_id.clone(),
                            raw_label: a.label.clone(),
                            pose: Se3::new(
                                [s.position[0] + nx, s.position[1] + ny, a.extent[2] / 2.0],
                                Quaternion::from_yaw(s.yaw),
                            ),
                            extent: a.extent,
                            velocity: Some([s.velocity[0], s.velocity[1], 0.0]),
                        }
                    })
                    .collect();
                BoxFrame { timestamp: t, boxes }
            })
            .collect();
        rates.insert(Modality::Boxes.to_string(), hz);
        streams.push(EventStream::new(Modality::Boxes, StreamRecords::Boxes(frames))?);
    }

    if let Some(hz) = p.traffic_light_hz {
        let mut lanes: Vec<&str> = map
            .iter()
            .flatten()
            .filter(|o| o.layer == MapLayer::Lane)
            .map(|o| o.id.as_str())
            .take(4)
            .collect();
        if lanes.is_empty() {
            lanes.push("lane_0");
        }
        let ph = phase(&mut rng);
        let frames = stream_times(start, ph, hz, cfg.duration_s)
            .into_iter()
            .map(|t| TrafficLightFrame {
                timestamp: t,
                lights: lanes
                    .iter()
                    .enumerate()
                    .map(|(i, l)| TrafficLightStatus { lane_id: l.to_string(), state: light_state(secs(t, start), 11.5 * i as f64) })
                    .collect(),
            })
            .collect();
        rates.insert(Modality::TrafficLights.to_string(), hz);
        streams.push(EventStream::new(Modality::TrafficLights, StreamRecords::TrafficLights(frames))?);
    }

    for id in &cam_ids {
        let ph = phase(&mut rng);
        let records = stream_times(start, ph, p.camera_hz, cfg.duration_s)
            .into_iter()
            .map(|t| {
                let mut bytes = vec![0xFF, 0xD8, 0xFF, 0xE0];
                bytes.extend((0..24).map(|_| rng.gen::<u8>()));
                bytes.extend([0xFF, 0xD9]);
                Ok(CameraFrameRecord { timestamp: t, camera_id: id.clone(), payload: PayloadRef::inline(bytes, Codec::Jpeg)?, frame_index: None })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = Modality::Camera(id.clone());
        rates.insert(m.to_string(), p.camera_hz);
        streams.push(EventStream::new(m, StreamRecords::Camera(records))?);
    }

    for id in &lidar_ids {
        let ph = phase(&mut rng);
        let sweep = (1e6 / p.lidar_hz).round() as i64 - 1;
        let records = stream_times(start, ph, p.lidar_hz, cfg.duration_s)
            .into_iter()
            .map(|t| {
                let cloud = lidar_cloud(&mut rng, cfg.lidar_points);
                Ok(LidarSweepRecord {
                    timestamp_start: t,
                    timestamp_end: TimePoint::from_micros(t.micros() + sweep),
                    lidar_id: id.clone(),
                    payload: PayloadRef::inline(cloud.encode(&cfg.lidar_codec)?, cfg.lidar_codec.clone())?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let m = Modality::Lidar(id.clone());
        rates.insert(m.to_string(), p.lidar_hz);
        streams.push(EventStream::new(m, StreamRecords::Lidar(records))?);
    }

    let truth = GroundTruth {
        log_id: cfg.log_id.clone(),
        seed: cfg.seed,
        start_us: start,
        duration_s: cfg.duration_s,
        ego: ego_motion,
        agents,
        box_noise_sigma_m: cfg.box_noise_sigma_m,
        rates_hz: rates,
        record_counts: streams.iter().map(|s| (s.modality.to_string(), s.len())).collect(),
    };
    let log = ParsedLog {
        metadata,
        streams,
        map: map.map(|objects| SourceMap { objects, scope: MapScope::PerLog, name: "map".into() }),
        payload_base: None,
    };
    Ok((log, truth))
}

/// Writes a synthetic scenario as a JSONL source directory plus `ground_truth.json`.
pub fn generate_synthetic(cfg: &SyntheticScenarioConfig, dir: &Path) -> Result<GroundTruth> {
    let (log, truth) = synthesize(cfg)?;
    if dir.exists() {
        std::fs::remove_dir_all(dir).at(dir)?;
    }
    write_jsonl_source(&log, dir, &JsonlWriteOptions { inline_payloads: cfg.inline_payloads, ..Default::default() })?;
    let path = dir.join(GROUND_TRUTH_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&truth)? + "\n").at(&path)?;
    Ok(truth)
}
