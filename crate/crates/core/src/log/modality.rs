use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// One independent event stream of a log. The string form doubles as the file stem.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Modality {
    EgoState,
    Boxes,
    TrafficLights,
    Camera(String),
    Lidar(String),
}

impl Modality {
    pub fn file_name(&self) -> String {
        format!("{self}.arrow")
    }

    pub fn sensor_id(&self) -> Option<&str> {
        match self {
            Modality::Camera(id) | Modality::Lidar(id) => Some(id),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Modality::EgoState => "ego_state",
            Modality::Boxes => "boxes",
            Modality::TrafficLights => "traffic_lights",
            Modality::Camera(_) => "camera",
            Modality::Lidar(_) => "lidar",
        }
    }

    /// Inverse of [`file_name`](Self::file_name); `None` for sync tables and unrelated files.
    pub fn from_file_name(name: &str) -> Option<Modality> {
        name.strip_suffix(".arrow")?.parse().ok()
    }
}

fn valid_sensor_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl FromStr for Modality {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let m = match s {
            "ego_state" => Modality::EgoState,
            "boxes" => Modality::Boxes,
            "traffic_lights" => Modality::TrafficLights,
            _ => {
                if let Some(id) = s.strip_prefix("camera_").filter(|id| valid_sensor_id(id)) {
                    Modality::Camera(id.to_string())
                } else if let Some(id) = s.strip_prefix("lidar_").filter(|id| valid_sensor_id(id)) {
                    Modality::Lidar(id.to_string())
                } else {
                    return Err(Error::UnknownModality(s.to_string()));
                }
            }
        };
        Ok(m)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modality::Camera(id) => write!(f, "camera_{id}"),
            Modality::Lidar(id) => write!(f, "lidar_{id}"),
            other => f.write_str(other.kind()),
        }
    }
}

impl Serialize for Modality {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Modality {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
