use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::cache::{LogCache, MapCache};
use crate::error::{Error, Result};
use crate::geom::{pose_at_reference, ReferencePoint, Se3, TimePoint, VehicleParameters};
use crate::log::{
    decode_points, BoxFrame, CameraFrameRecord, EgoStateRecord, LidarSweepRecord, LogHandle, LogMetadata, Modality, PointCloud,
    Record, TrafficLightFrame,
};
use crate::map::MapStore;
use crate::sync::{match_timestamp, MatchCriteria, SyncTable};

/// Caches shared by every scene of one loader.
#[derive(Debug, Default)]
pub struct SceneContext {
    pub logs: LogCache,
    pub maps: MapCache,
}

/// Result of a synchronized lookup: the record, or a null cell in the sync table.
#[derive(Debug, Clone, PartialEq)]
pub enum Lookup<T> {
    Found(T),
    AbsentModality,
}

impl<T> Lookup<T> {
    pub fn found(self) -> Option<T> {
        match self {
            Lookup::Found(v) => Some(v),
            Lookup::AbsentModality => None,
        }
    }

    pub fn is_absent(&self) -> bool {
        matches!(self, Lookup::AbsentModality)
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> Lookup<U> {
        match self {
            Lookup::Found(v) => Lookup::Found(f(v)),
            Lookup::AbsentModality => Lookup::AbsentModality,
        }
    }
}

/// An ego record with its pose resolved at the rear axle and the vehicle center.
#[derive(Debug, Clone, PartialEq)]
pub struct EgoState {
    pub record: EgoStateRecord,
    pub rear_axle: Se3,
    pub center: Se3,
}

impl EgoState {
    pub fn from_record(record: EgoStateRecord, vehicle: &VehicleParameters) -> Result<Self> {
        let rear_axle = pose_at_reference(&record.pose, vehicle, ReferencePoint::RearAxle)?;
        let center = pose_at_reference(&record.pose, vehicle, ReferencePoint::Center)?;
        Ok(EgoState { record, rear_axle, center })
    }

    pub fn timestamp(&self) -> TimePoint {
        self.record.timestamp
    }

    pub fn center_3d(&self) -> [f64; 3] {
        self.center.translation
    }

    pub fn speed(&self) -> f64 {
        let v = self.record.velocity_body;
        (v[0] * v[0] + v[1] * v[1]).sqrt()
    }
}

/// A window of frames in one log's sync table. Holds indices only; records are
/// fetched through the shared log cache on access.
///
/// Iteration 0 is the current frame, history iterations are negative.
#[derive(Debug, Clone)]
pub struct SceneView {
    pub(crate) log_dir: Arc<PathBuf>,
    pub(crate) split: Arc<str>,
    pub(crate) sync: Arc<SyncTable>,
    pub(crate) anchor: usize,
    pub(crate) history: usize,
    pub(crate) future: usize,
    pub(crate) ctx: Arc<SceneContext>,
}

impl SceneView {
    pub fn log_dir(&self) -> &Path {
        &self.log_dir
    }

    pub fn log_id(&self) -> &str {
        self.log_dir.file_name().and_then(|s| s.to_str()).unwrap_or_default()
    }

    pub fn split(&self) -> &str {
        &self.split
    }

    pub fn sync_table(&self) -> &SyncTable {
        &self.sync
    }

    /// Smallest and largest valid iteration.
    pub fn iteration_bounds(&self) -> (i64, i64) {
        (-(self.history as i64), self.future as i64)
    }

    pub fn num_iterations(&self) -> usize {
        self.history + 1 + self.future
    }

    /// Sync-table frames covered by the scene.
    pub fn frame_range(&self) -> std::ops::Range<usize> {
        self.anchor - self.history..self.anchor + self.future + 1
    }

    pub fn frame_index(&self, iteration: i64) -> Result<usize> {
        let (min, max) = self.iteration_bounds();
        if iteration < min || iteration > max {
            return Err(Error::IterationOutOfRange { iteration, min, max });
        }
        Ok((self.anchor as i64 + iteration) as usize)
    }

    pub fn timestamp_at_iteration(&self, iteration: i64) -> Result<TimePoint> {
        Ok(self.sync.frame_timestamps()[self.frame_index(iteration)?])
    }

    pub fn log(&self) -> Result<Arc<LogHandle>> {
        self.ctx.logs.get(&self.log_dir)
    }

    pub fn metadata(&self) -> Result<LogMetadata> {
        Ok(self.log()?.metadata().clone())
    }

    fn check_sensor(log: &LogHandle, modality: &Modality) -> Result<()> {
        let md = log.metadata();
        let known = match modality {
            Modality::Camera(id) => md.cameras.contains_key(id),
            Modality::Lidar(id) => md.lidars.contains_key(id),
            _ => true,
        };
        if known {
            Ok(())
        } else {
            Err(Error::UnknownSensorId(modality.sensor_id().unwrap_or_default().to_string()))
        }
    }

    /// Record of `modality` at `iteration`: a sync-table lookup and one row fetch.
    pub fn get_record_at_iteration(&self, iteration: i64, modality: &Modality) -> Result<Lookup<Record>> {
        let frame = self.frame_index(iteration)?;
        let log = self.log()?;
        Self::check_sensor(&log, modality)?;
        match self.sync.row(frame, modality) {
            None => Ok(Lookup::AbsentModality),
            Some(row) => Ok(Lookup::Found(log.stream(modality)?.get(row)?)),
        }
    }

    pub fn get_ego_state_se3_at_iteration(&self, iteration: i64) -> Result<Lookup<EgoState>> {
        match self.get_record_at_iteration(iteration, &Modality::EgoState)? {
            Lookup::Found(Record::EgoState(r)) => Ok(Lookup::Found(EgoState::from_record(r, &self.log()?.metadata().vehicle)?)),
            Lookup::Found(_) => unreachable!("ego stream yields ego records"),
            Lookup::AbsentModality => Ok(Lookup::AbsentModality),
        }
    }

    pub fn get_box_detections_at_iteration(&self, iteration: i64) -> Result<Lookup<BoxFrame>> {
        Ok(self.get_record_at_iteration(iteration, &Modality::Boxes)?.map(|r| match r {
            Record::Boxes(f) => f,
            _ => unreachable!("box stream yields box frames"),
        }))
    }

    pub fn get_traffic_lights_at_iteration(&self, iteration: i64) -> Result<Lookup<TrafficLightFrame>> {
        Ok(self.get_record_at_iteration(iteration, &Modality::TrafficLights)?.map(|r| match r {
            Record::TrafficLights(f) => f,
            _ => unreachable!("traffic light stream yields light frames"),
        }))
    }

    pub fn get_camera_at_iteration(&self, iteration: i64, camera_id: &str) -> Result<Lookup<CameraFrameRecord>> {
        Ok(self.get_record_at_iteration(iteration, &Modality::Camera(camera_id.into()))?.map(|r| match r {
            Record::Camera(c) => c,
            _ => unreachable!("camera stream yields camera frames"),
        }))
    }

    pub fn get_lidar_at_iteration(&self, iteration: i64, lidar_id: &str) -> Result<Lookup<LidarSweepRecord>> {
        Ok(self.get_record_at_iteration(iteration, &Modality::Lidar(lidar_id.into()))?.map(|r| match r {
            Record::Lidar(l) => l,
            _ => unreachable!("lidar stream yields sweeps"),
        }))
    }

    /// Matches `timestamp` against the native-rate stream, bypassing the sync table.
    pub fn get_record_at_timestamp(&self, modality: &Modality, timestamp: TimePoint, criteria: &MatchCriteria) -> Result<Record> {
        criteria.validate()?;
        let log = self.log()?;
        Self::check_sensor(&log, modality)?;
        let no_match = || Error::NoMatchWithinTolerance { modality: modality.to_string(), timestamp };
        let stream = log.stream(modality).map_err(|_| no_match())?;
        let row = match_timestamp(stream.timestamps()?, timestamp, criteria).ok_or_else(no_match)?;
        stream.get(row)
    }

    pub fn get_camera_at_timestamp(&self, timestamp: TimePoint, camera_id: &str, criteria: &MatchCriteria) -> Result<CameraFrameRecord> {
        match self.get_record_at_timestamp(&Modality::Camera(camera_id.into()), timestamp, criteria)? {
            Record::Camera(c) => Ok(c),
            _ => unreachable!("camera stream yields camera frames"),
        }
    }

    pub fn get_lidar_point_cloud(&self, sweep: &LidarSweepRecord) -> Result<PointCloud> {
        decode_points(&sweep.payload, &self.log_dir)
    }

    pub fn get_camera_bytes(&self, frame: &CameraFrameRecord) -> Result<Vec<u8>> {
        frame.payload.bytes(&self.log_dir)
    }

    /// The log's map, shared with every other scene referencing the same file.
    pub fn get_map_api(&self) -> Result<Arc<MapStore>> {
        let log = self.log()?;
        let Some(map_ref) = &log.metadata().map_ref else {
            return Err(Error::MapUnavailable(format!("log `{}` has no map", self.log_id())));
        };
        self.ctx.maps.get(&self.log_dir.join(map_ref))
    }
}
