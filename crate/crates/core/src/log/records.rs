use std::path::PathBuf;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::modality::Modality;
use super::payload::{Codec, PayloadLocation, PayloadRef};
use crate::error::{Error, Result};
use crate::geom::{Se3, TimePoint, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoStateRecord {
    pub timestamp: TimePoint,
    /// Global pose at the log's declared pose origin.
    pub pose: Se3,
    pub velocity_body: Vec3,
    pub acceleration_body: Vec3,
    pub angular_velocity_z: f64,
}

/// A single annotated object. Boxes are stored per timestamp in a [`BoxFrame`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxDetection {
    pub track_id: String,
    /// Label as published by the source dataset.
    pub raw_label: String,
    /// Global pose of the box center.
    pub pose: Se3,
    /// (length, width, height) in meters.
    pub extent: Vec3,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxFrame {
    pub timestamp: TimePoint,
    pub boxes: Vec<BoxDetection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficLightState {
    Red,
    Yellow,
    Green,
    Off,
    Unknown,
}

impl TrafficLightState {
    pub fn as_str(&self) -> &'static str {
        match self {
            TrafficLightState::Red => "red",
            TrafficLightState::Yellow => "yellow",
            TrafficLightState::Green => "green",
            TrafficLightState::Off => "off",
            TrafficLightState::Unknown => "unknown",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "red" => TrafficLightState::Red,
            "yellow" => TrafficLightState::Yellow,
            "green" => TrafficLightState::Green,
            "off" => TrafficLightState::Off,
            "unknown" => TrafficLightState::Unknown,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficLightStatus {
    /// Map lane governed by this light; resolved lazily against the map.
    pub lane_id: String,
    pub state: TrafficLightState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficLightFrame {
    pub timestamp: TimePoint,
    pub lights: Vec<TrafficLightStatus>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraFrameRecord {
    pub timestamp: TimePoint,
    pub camera_id: String,
    pub payload: PayloadRef,
    /// Frame position inside a shared video blob (mp4 only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_index: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LidarSweepRecord {
    pub timestamp_start: TimePoint,
    pub timestamp_end: TimePoint,
    pub lidar_id: String,
    pub payload: PayloadRef,
}

/// A row of any modality.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "modality", rename_all = "snake_case")]
pub enum Record {
    EgoState(EgoStateRecord),
    Boxes(BoxFrame),
    TrafficLights(TrafficLightFrame),
    Camera(CameraFrameRecord),
    Lidar(LidarSweepRecord),
}

impl Record {
    /// The key used for matching; lidar sweeps match on their start time.
    pub fn timestamp(&self) -> TimePoint {
        match self {
            Record::EgoState(r) => r.timestamp,
            Record::Boxes(r) => r.timestamp,
            Record::TrafficLights(r) => r.timestamp,
            Record::Camera(r) => r.timestamp,
            Record::Lidar(r) => r.timestamp_start,
        }
    }
}

/// Rows of one modality, in timestamp order.
#[derive(Debug, Clone, PartialEq)]
pub enum StreamRecords {
    EgoState(Vec<EgoStateRecord>),
    Boxes(Vec<BoxFrame>),
    TrafficLights(Vec<TrafficLightFrame>),
    Camera(Vec<CameraFrameRecord>),
    Lidar(Vec<LidarSweepRecord>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub modality: Modality,
    pub records: StreamRecords,
}

impl StreamRecords {
    pub fn len(&self) -> usize {
        match self {
            StreamRecords::EgoState(v) => v.len(),
            StreamRecords::Boxes(v) => v.len(),
            StreamRecords::TrafficLights(v) => v.len(),
            StreamRecords::Camera(v) => v.len(),
            StreamRecords::Lidar(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn timestamps(&self) -> Vec<TimePoint> {
        match self {
            StreamRecords::EgoState(v) => v.iter().map(|r| r.timestamp).collect(),
            StreamRecords::Boxes(v) => v.iter().map(|r| r.timestamp).collect(),
            StreamRecords::TrafficLights(v) => v.iter().map(|r| r.timestamp).collect(),
            StreamRecords::Camera(v) => v.iter().map(|r| r.timestamp).collect(),
            StreamRecords::Lidar(v) => v.iter().map(|r| r.timestamp_start).collect(),
        }
    }

    pub fn get(&self, row: usize) -> Option<Record> {
        Some(match self {
            StreamRecords::EgoState(v) => Record::EgoState(v.get(row)?.clone()),
            StreamRecords::Boxes(v) => Record::Boxes(v.get(row)?.clone()),
            StreamRecords::TrafficLights(v) => Record::TrafficLights(v.get(row)?.clone()),
            StreamRecords::Camera(v) => Record::Camera(v.get(row)?.clone()),
            StreamRecords::Lidar(v) => Record::Lidar(v.get(row)?.clone()),
        })
    }

    pub(crate) fn payloads_mut(&mut self) -> Vec<&mut PayloadRef> {
        match self {
            StreamRecords::Camera(v) => v.iter_mut().map(|r| &mut r.payload).collect(),
            StreamRecords::Lidar(v) => v.iter_mut().map(|r| &mut r.payload).collect(),
            _ => Vec::new(),
        }
    }
}

fn finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

impl EventStream {
    pub fn new(modality: Modality, records: StreamRecords) -> Result<Self> {
        let s = EventStream { modality, records };
        s.validate()?;
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Checks record invariants, modality/record agreement and strictly increasing timestamps.
    pub fn validate(&self) -> Result<()> {
        let name = self.modality.to_string();
        let bad = |reason: String| Error::InvalidRecord { modality: name.clone(), reason };
        match (&self.modality, &self.records) {
            (Modality::EgoState, StreamRecords::EgoState(rows)) => {
                for (i, r) in rows.iter().enumerate() {
                    if !(finite(&r.pose.to_array())
                        && finite(&r.velocity_body)
                        && finite(&r.acceleration_body)
                        && r.angular_velocity_z.is_finite())
                    {
                        return Err(bad(format!("row {i} has non-finite values")));
                    }
                }
            }
            (Modality::Boxes, StreamRecords::Boxes(rows)) => {
                for (i, f) in rows.iter().enumerate() {
                    for b in &f.boxes {
                        if b.raw_label.is_empty() {
                            return Err(bad(format!("row {i}: box `{}` has an empty label", b.track_id)));
                        }
                        if !b.extent.iter().all(|&e| e > 0.0 && e.is_finite()) {
                            return Err(bad(format!("row {i}: box `{}` has non-positive extent", b.track_id)));
                        }
                        if !finite(&b.pose.to_array()) || !b.velocity.map_or(true, |v| finite(&v)) {
                            return Err(bad(format!("row {i}: box `{}` has non-finite values", b.track_id)));
                        }
                    }
                }
            }
            (Modality::TrafficLights, StreamRecords::TrafficLights(_)) => {}
            (Modality::Camera(id), StreamRecords::Camera(rows)) => {
                for (i, r) in rows.iter().enumerate() {
                    if &r.camera_id != id {
                        return Err(bad(format!("row {i} carries camera id `{}`", r.camera_id)));
                    }
                    r.payload.validate()?;
                }
            }
            (Modality::Lidar(id), StreamRecords::Lidar(rows)) => {
                for (i, r) in rows.iter().enumerate() {
                    if &r.lidar_id != id {
                        return Err(bad(format!("row {i} carries lidar id `{}`", r.lidar_id)));
                    }
                    if r.timestamp_start > r.timestamp_end {
                        return Err(bad(format!("row {i}: sweep ends before it starts")));
                    }
                    r.payload.validate()?;
                }
            }
            _ => return Err(bad("records do not match the modality".into())),
        }
        let ts = self.records.timestamps();
        if let Some(i) = ts.windows(2).position(|w| w[1] <= w[0]) {
            return Err(Error::UnsortedTimestamps { modality: name, row: i + 1 });
        }
        Ok(())
    }
}

/// JSON form: `{"codec": .., "path": ..}` or `{"codec": .., "inline_b64": ..}`.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PayloadJson {
    codec: Codec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inline_b64: Option<String>,
}

impl Serialize for PayloadRef {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let (path, inline_b64) = match &self.location {
            PayloadLocation::Inline(b) => (None, Some(B64.encode(b))),
            PayloadLocation::External(p) => (Some(p.clone()), None),
        };
        PayloadJson { codec: self.codec.clone(), path, inline_b64 }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for PayloadRef {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let j = PayloadJson::deserialize(d)?;
        let p = match (j.path, j.inline_b64) {
            (Some(path), None) => PayloadRef::external(path, j.codec),
            (None, Some(b)) => {
                let bytes = B64.decode(b).map_err(D::Error::custom)?;
                PayloadRef::inline(bytes, j.codec)
            }
            _ => return Err(D::Error::custom("payload needs exactly one of `path` or `inline_b64`")),
        };
        p.map_err(D::Error::custom)
    }
}
