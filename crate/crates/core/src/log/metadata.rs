use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{CameraModel, Se3, VehicleParameters};

/// Schema metadata keys written into every IPC file.
pub const META_LOG: &str = "d123.log_metadata";
pub const META_MODALITY: &str = "d123.modality";
pub const META_FORMAT_VERSION: &str = "d123.format_version";
pub const META_SYNC_CONFIG: &str = "d123.sync_config";
pub const META_MAP: &str = "d123.map";
pub const FORMAT_VERSION: &str = "1";

/// Static per-log description, embedded independently in each stream file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogMetadata {
    pub log_id: String,
    pub dataset: String,
    pub vehicle: VehicleParameters,
    #[serde(default)]
    pub cameras: BTreeMap<String, CameraModel>,
    /// Lidar extrinsics in the body frame.
    #[serde(default)]
    pub lidars: BTreeMap<String, Se3>,
    /// Map file path relative to the log directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map_ref: Option<String>,
    /// Name of the source label taxonomy.
    pub label_space: String,
}

impl LogMetadata {
    pub fn validate(&self) -> Result<()> {
        if self.log_id.is_empty()
            || self.log_id.contains(['/', '\\'])
            || self.log_id == "."
            || self.log_id == ".."
        {
            return Err(Error::InvalidRecord { modality: "metadata".into(), reason: format!("bad log id `{}`", self.log_id) });
        }
        self.vehicle.validate()?;
        for cam in self.cameras.values() {
            cam.validate()?;
        }
        if let Some(id) = self.cameras.keys().find(|id| self.lidars.contains_key(*id)) {
            return Err(Error::InvalidRecord {
                modality: "metadata".into(),
                reason: format!("sensor id `{id}` used by a camera and a lidar"),
            });
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metadata serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
