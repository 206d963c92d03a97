//! Arrow schemas for every modality and conversion between records and batches.
//!
//! Poses are seven float64 columns `(tx, ty, tz, qw, qx, qy, qz)`; the first
//! column of every schema is the int64 microsecond timestamp used for matching.

use std::ops::Range;
use std::path::PathBuf;
use std::sync::Arc;

use arrow_array::builder::{BinaryBuilder, Float64Builder, StringBuilder, UInt32Builder};
use arrow_array::cast::AsArray;
use arrow_array::types::{Float64Type, Int64Type, UInt32Type};
use arrow_array::{Array, ArrayRef, Float64Array, Int64Array, ListArray, RecordBatch, StringArray, StructArray};
use arrow_buffer::OffsetBuffer;
use arrow_schema::{DataType, Field, Fields, Schema};

use super::modality::Modality;
use super::payload::{PayloadLocation, PayloadRef};
use super::records::*;
use crate::error::{Error, Result};
use crate::geom::{Quaternion, Se3, TimePoint};

pub(crate) const TIMESTAMP: &str = "timestamp";
const POSE: [&str; 7] = ["tx", "ty", "tz", "qw", "qx", "qy", "qz"];

fn f64_field(name: &str) -> Field {
    Field::new(name, DataType::Float64, false)
}

fn pose_fields() -> Vec<Field> {
    POSE.iter().map(|n| f64_field(n)).collect()
}

fn box_struct_fields() -> Fields {
    let mut f = vec![Field::new("track_id", DataType::Utf8, false), Field::new("label", DataType::Utf8, false)];
    f.extend(pose_fields());
    f.extend(["length", "width", "height"].map(f64_field));
    f.extend(["vx", "vy", "vz"].map(|n| Field::new(n, DataType::Float64, true)));
    Fields::from(f)
}

fn light_struct_fields() -> Fields {
    Fields::from(vec![Field::new("lane_id", DataType::Utf8, false), Field::new("state", DataType::Utf8, false)])
}

fn payload_fields() -> Vec<Field> {
    vec![
        Field::new("codec", DataType::Utf8, false),
        Field::new("payload_inline", DataType::Binary, true),
        Field::new("payload_path", DataType::Utf8, true),
    ]
}

/// Columns of a modality's file, without schema metadata.
pub fn modality_fields(m: &Modality) -> Vec<Field> {
    let mut f = vec![Field::new(TIMESTAMP, DataType::Int64, false)];
    match m {
        Modality::EgoState => {
            f.extend(pose_fields());
            f.extend(["vx", "vy", "vz", "ax", "ay", "az", "yaw_rate"].map(f64_field));
        }
        Modality::Boxes => {
            let item = Field::new("item", DataType::Struct(box_struct_fields()), true);
            f.push(Field::new("boxes", DataType::List(Arc::new(item)), false));
        }
        Modality::TrafficLights => {
            let item = Field::new("item", DataType::Struct(light_struct_fields()), true);
            f.push(Field::new("lights", DataType::List(Arc::new(item)), false));
        }
        Modality::Camera(_) => {
            f.push(Field::new("camera_id", DataType::Utf8, false));
            f.extend(payload_fields());
            f.push(Field::new("frame_index", DataType::UInt32, true));
        }
        Modality::Lidar(_) => {
            f.push(Field::new("timestamp_end", DataType::Int64, false));
            f.push(Field::new("lidar_id", DataType::Utf8, false));
            f.extend(payload_fields());
        }
    }
    f
}

fn f64_array(values: impl IntoIterator<Item = f64>) -> ArrayRef {
    Arc::new(Float64Array::from_iter_values(values))
}

fn i64_array(values: impl IntoIterator<Item = i64>) -> ArrayRef {
    Arc::new(Int64Array::from_iter_values(values))
}

fn str_array<'a>(values: impl IntoIterator<Item = &'a str>) -> ArrayRef {
    Arc::new(StringArray::from_iter_values(values))
}

fn pose_arrays<'a>(poses: impl Iterator<Item = &'a Se3> + Clone) -> Vec<ArrayRef> {
    (0..7).map(|k| f64_array(poses.clone().map(|p| p.to_array()[k]))).collect()
}

fn payload_arrays<'a>(payloads: impl Iterator<Item = &'a PayloadRef>) -> Vec<ArrayRef> {
    let mut codec = StringBuilder::new();
    let mut inline = BinaryBuilder::new();
    let mut path = StringBuilder::new();
    for p in payloads {
        codec.append_value(p.codec.as_str());
        match &p.location {
            PayloadLocation::Inline(b) => {
                inline.append_value(b);
                path.append_null();
            }
            PayloadLocation::External(rel) => {
                inline.append_null();
                path.append_value(rel.to_string_lossy());
            }
        }
    }
    vec![Arc::new(codec.finish()), Arc::new(inline.finish()), Arc::new(path.finish())]
}

/// Builds the batch holding `rows` of `records`.
pub fn records_to_batch(schema: &Arc<Schema>, records: &StreamRecords, rows: Range<usize>) -> Result<RecordBatch> {
    let columns: Vec<ArrayRef> = match records {
        StreamRecords::EgoState(v) => {
            let v = &v[rows];
            let mut c = vec![i64_array(v.iter().map(|r| r.timestamp.micros()))];
            c.extend(pose_arrays(v.iter().map(|r| &r.pose)));
            for k in 0..3 {
                c.push(f64_array(v.iter().map(|r| r.velocity_body[k])));
            }
            for k in 0..3 {
                c.push(f64_array(v.iter().map(|r| r.acceleration_body[k])));
            }
            c.push(f64_array(v.iter().map(|r| r.angular_velocity_z)));
            c
        }
        StreamRecords::Boxes(v) => {
            let v = &v[rows];
            let all: Vec<&BoxDetection> = v.iter().flat_map(|f| f.boxes.iter()).collect();
            let mut children = vec![
                str_array(all.iter().map(|b| b.track_id.as_str())),
                str_array(all.iter().map(|b| b.raw_label.as_str())),
            ];
            children.extend(pose_arrays(all.iter().map(|b| &b.pose)));
            for k in 0..3 {
                children.push(f64_array(all.iter().map(|b| b.extent[k])));
            }
            for k in 0..3 {
                let mut vb = Float64Builder::with_capacity(all.len());
                for b in &all {
                    vb.append_option(b.velocity.map(|vel| vel[k]));
                }
                children.push(Arc::new(vb.finish()));
            }
            let items = StructArray::try_new(box_struct_fields(), children, None)?;
            let offsets = OffsetBuffer::from_lengths(v.iter().map(|f| f.boxes.len()));
            let item = Arc::new(Field::new("item", DataType::Struct(box_struct_fields()), true));
            let list = ListArray::try_new(item, offsets, Arc::new(items), None)?;
            vec![i64_array(v.iter().map(|f| f.timestamp.micros())), Arc::new(list)]
        }
        StreamRecords::TrafficLights(v) => {
            let v = &v[rows];
            let all: Vec<&TrafficLightStatus> = v.iter().flat_map(|f| f.lights.iter()).collect();
            let children = vec![
                str_array(all.iter().map(|l| l.lane_id.as_str())),
                str_array(all.iter().map(|l| l.state.as_str())),
            ];
            let items = StructArray::try_new(light_struct_fields(), children, None)?;
            let offsets = OffsetBuffer::from_lengths(v.iter().map(|f| f.lights.len()));
            let item = Arc::new(Field::new("item", DataType::Struct(light_struct_fields()), true));
            let list = ListArray::try_new(item, offsets, Arc::new(items), None)?;
            vec![i64_array(v.iter().map(|f| f.timestamp.micros())), Arc::new(list)]
        }
        StreamRecords::Camera(v) => {
            let v = &v[rows];
            let mut c = vec![
                i64_array(v.iter().map(|r| r.timestamp.micros())),
                str_array(v.iter().map(|r| r.camera_id.as_str())),
            ];
            c.extend(payload_arrays(v.iter().map(|r| &r.payload)));
            let mut fi = UInt32Builder::with_capacity(v.len());
            for r in v {
                fi.append_option(r.frame_index);
            }
            c.push(Arc::new(fi.finish()));
            c
        }
        StreamRecords::Lidar(v) => {
            let v = &v[rows];
            let mut c = vec![
                i64_array(v.iter().map(|r| r.timestamp_start.micros())),
                i64_array(v.iter().map(|r| r.timestamp_end.micros())),
                str_array(v.iter().map(|r| r.lidar_id.as_str())),
            ];
            c.extend(payload_arrays(v.iter().map(|r| &r.payload)));
            c
        }
    };
    Ok(RecordBatch::try_new(schema.clone(), columns)?)
}

/// Typed column access that reports schema problems as corruption.
pub(crate) struct Columns<'a> {
    pub batch: &'a RecordBatch,
    pub path: &'a std::path::Path,
}

impl<'a> Columns<'a> {
    fn column(&self, name: &str) -> Result<&'a ArrayRef> {
        self.batch
            .column_by_name(name)
            .ok_or_else(|| Error::corrupt(self.path, format!("missing column `{name}`")))
    }

    fn typed<T: 'static>(&self, name: &str, arr: Option<&'a T>) -> Result<&'a T> {
        arr.ok_or_else(|| Error::corrupt(self.path, format!("column `{name}` has the wrong type")))
    }

    pub fn f64(&self, name: &str) -> Result<&'a Float64Array> {
        let c = self.column(name)?;
        self.typed(name, c.as_primitive_opt::<Float64Type>())
    }

    pub fn i64(&self, name: &str) -> Result<&'a Int64Array> {
        let c = self.column(name)?;
        self.typed(name, c.as_primitive_opt::<Int64Type>())
    }

    pub fn u32(&self, name: &str) -> Result<&'a arrow_array::UInt32Array> {
        let c = self.column(name)?;
        self.typed(name, c.as_primitive_opt::<UInt32Type>())
    }

    pub fn str(&self, name: &str) -> Result<&'a StringArray> {
        let c = self.column(name)?;
        self.typed(name, c.as_string_opt::<i32>())
    }

    pub fn binary(&self, name: &str) -> Result<&'a arrow_array::BinaryArray> {
        let c = self.column(name)?;
        self.typed(name, c.as_binary_opt::<i32>())
    }

    pub fn list(&self, name: &str) -> Result<&'a ListArray> {
        let c = self.column(name)?;
        self.typed(name, c.as_list_opt::<i32>())
    }

    fn pose(&self, cols: &[&Float64Array; 7], i: usize) -> Result<Se3> {
        let v: [f64; 7] = std::array::from_fn(|k| cols[k].value(i));
        let q = Quaternion::new(v[3], v[4], v[5], v[6]).map_err(|e| Error::corrupt(self.path, e))?;
        Ok(Se3::new([v[0], v[1], v[2]], q))
    }

    fn pose_columns(&self) -> Result<[&'a Float64Array; 7]> {
        let v = POSE.iter().map(|n| self.f64(n)).collect::<Result<Vec<_>>>()?;
        Ok(v.try_into().unwrap())
    }

    fn payload(&self, i: usize) -> Result<PayloadRef> {
        let codec = self.str("codec")?.value(i).parse().unwrap();
        let inline = self.binary("payload_inline")?;
        let path = self.str("payload_path")?;
        let location = match (inline.is_valid(i), path.is_valid(i)) {
            (true, false) => PayloadLocation::Inline(inline.value(i).to_vec()),
            (false, true) => PayloadLocation::External(PathBuf::from(path.value(i))),
            _ => return Err(Error::corrupt(self.path, format!("row {i}: payload must be inline or a path"))),
        };
        let p = PayloadRef { location, codec };
        p.validate().map_err(|e| Error::corrupt(self.path, e))?;
        Ok(p)
    }
}

fn ts(v: i64) -> TimePoint {
    TimePoint::from_micros(v)
}

/// Reads rows `rows` (batch-relative) of a modality batch.
pub(crate) fn batch_to_records(
    modality: &Modality,
    cols: &Columns<'_>,
    rows: Range<usize>,
) -> Result<StreamRecords> {
    let t = cols.i64(TIMESTAMP)?;
    Ok(match modality {
        Modality::EgoState => {
            let pose = cols.pose_columns()?;
            let named = ["vx", "vy", "vz", "ax", "ay", "az", "yaw_rate"]
                .iter()
                .map(|n| cols.f64(n))
                .collect::<Result<Vec<_>>>()?;
            let out = rows
                .map(|i| {
                    Ok(EgoStateRecord {
                        timestamp: ts(t.value(i)),
                        pose: cols.pose(&pose, i)?,
                        velocity_body: [named[0].value(i), named[1].value(i), named[2].value(i)],
                        acceleration_body: [named[3].value(i), named[4].value(i), named[5].value(i)],
                        angular_velocity_z: named[6].value(i),
                    })
                })
                .collect::<Result<_>>()?;
            StreamRecords::EgoState(out)
        }
        Modality::Boxes => {
            let list = cols.list("boxes")?;
            let items = list
                .values()
                .as_struct_opt()
                .ok_or_else(|| Error::corrupt(cols.path, "boxes items are not structs"))?;
            let inner_batch = RecordBatch::from(items.clone());
            let inner = Columns { batch: &inner_batch, path: cols.path };
            let track = inner.str("track_id")?;
            let label = inner.str("label")?;
            let pose = inner.pose_columns()?;
            let ext = ["length", "width", "height"].iter().map(|n| inner.f64(n)).collect::<Result<Vec<_>>>()?;
            let vel = ["vx", "vy", "vz"].iter().map(|n| inner.f64(n)).collect::<Result<Vec<_>>>()?;
            let offsets = list.value_offsets();
            let out = rows
                .map(|i| {
                    let boxes = (offsets[i] as usize..offsets[i + 1] as usize)
                        .map(|j| {
                            let velocity = if vel.iter().all(|c| c.is_valid(j)) {
                                Some([vel[0].value(j), vel[1].value(j), vel[2].value(j)])
                            } else {
                                None
                            };
                            Ok(BoxDetection {
                                track_id: track.value(j).to_string(),
                                raw_label: label.value(j).to_string(),
                                pose: inner.pose(&pose, j)?,
                                extent: [ext[0].value(j), ext[1].value(j), ext[2].value(j)],
                                velocity,
                            })
                        })
                        .collect::<Result<_>>()?;
                    Ok(BoxFrame { timestamp: ts(t.value(i)), boxes })
                })
                .collect::<Result<_>>()?;
            StreamRecords::Boxes(out)
        }
        Modality::TrafficLights => {
            let list = cols.list("lights")?;
            let items = list
                .values()
                .as_struct_opt()
                .ok_or_else(|| Error::corrupt(cols.path, "light items are not structs"))?;
            let inner_batch = RecordBatch::from(items.clone());
            let inner = Columns { batch: &inner_batch, path: cols.path };
            let lane = inner.str("lane_id")?;
            let state = inner.str("state")?;
            let offsets = list.value_offsets();
            let out = rows
                .map(|i| {
                    let lights = (offsets[i] as usize..offsets[i + 1] as usize)
                        .map(|j| {
                            let s = TrafficLightState::parse(state.value(j)).ok_or_else(|| {
                                Error::corrupt(cols.path, format!("unknown light state `{}`", state.value(j)))
                            })?;
                            Ok(TrafficLightStatus { lane_id: lane.value(j).to_string(), state: s })
                        })
                        .collect::<Result<_>>()?;
                    Ok(TrafficLightFrame { timestamp: ts(t.value(i)), lights })
                })
                .collect::<Result<_>>()?;
            StreamRecords::TrafficLights(out)
        }
        Modality::Camera(_) => {
            let id = cols.str("camera_id")?;
            let fi = cols.u32("frame_index")?;
            let out = rows
                .map(|i| {
                    Ok(CameraFrameRecord {
                        timestamp: ts(t.value(i)),
                        camera_id: id.value(i).to_string(),
                        payload: cols.payload(i)?,
                        frame_index: fi.is_valid(i).then(|| fi.value(i)),
                    })
                })
                .collect::<Result<_>>()?;
            StreamRecords::Camera(out)
        }
        Modality::Lidar(_) => {
            let end = cols.i64("timestamp_end")?;
            let id = cols.str("lidar_id")?;
            let out = rows
                .map(|i| {
                    Ok(LidarSweepRecord {
                        timestamp_start: ts(t.value(i)),
                        timestamp_end: ts(end.value(i)),
                        lidar_id: id.value(i).to_string(),
                        payload: cols.payload(i)?,
                    })
                })
                .collect::<Result<_>>()?;
            StreamRecords::Lidar(out)
        }
    })
}

/// The timestamp column of a (possibly projected) batch.
pub(crate) fn timestamp_values(batch: &RecordBatch, path: &std::path::Path) -> Result<Vec<TimePoint>> {
    let col = batch.column(0);
    let arr = col
        .as_primitive_opt::<Int64Type>()
        .ok_or_else(|| Error::corrupt(path, "first column is not an int64 timestamp"))?;
    if arr.null_count() > 0 {
        return Err(Error::corrupt(path, "null timestamps"));
    }
    Ok(arr.values().iter().map(|&v| ts(v)).collect())
}
