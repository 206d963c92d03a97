use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::geometry::Geometry;
use super::mesh::TriangleMesh;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapLayer {
    Lane,
    LaneGroup,
    Intersection,
    Crosswalk,
    Carpark,
    Walkway,
    GenericDrivable,
    StopZone,
    SpeedBump,
    RoadEdge,
    RoadLine,
}

impl MapLayer {
    pub const ALL: [MapLayer; 11] = [
        MapLayer::Lane,
        MapLayer::LaneGroup,
        MapLayer::Intersection,
        MapLayer::Crosswalk,
        MapLayer::Carpark,
        MapLayer::Walkway,
        MapLayer::GenericDrivable,
        MapLayer::StopZone,
        MapLayer::SpeedBump,
        MapLayer::RoadEdge,
        MapLayer::RoadLine,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            MapLayer::Lane => "lane",
            MapLayer::LaneGroup => "lane_group",
            MapLayer::Intersection => "intersection",
            MapLayer::Crosswalk => "crosswalk",
            MapLayer::Carpark => "carpark",
            MapLayer::Walkway => "walkway",
            MapLayer::GenericDrivable => "generic_drivable",
            MapLayer::StopZone => "stop_zone",
            MapLayer::SpeedBump => "speed_bump",
            MapLayer::RoadEdge => "road_edge",
            MapLayer::RoadLine => "road_line",
        }
    }

    /// Road edges and road lines are polylines; every other layer holds polygons.
    pub fn is_polyline(&self) -> bool {
        matches!(self, MapLayer::RoadEdge | MapLayer::RoadLine)
    }
}

impl FromStr for MapLayer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        MapLayer::ALL.into_iter().find(|l| l.as_str() == s).ok_or_else(|| Error::UnknownLayer(s.to_string()))
    }
}

impl fmt::Display for MapLayer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneAttributes {
    pub centerline: Geometry,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_boundary: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_boundary: Option<String>,
    /// Meters per second.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed_limit: Option<f64>,
    #[serde(default)]
    pub predecessors: Vec<String>,
    #[serde(default)]
    pub successors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_neighbor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_neighbor: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lane_group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaneGroupAttributes {
    /// Co-directional lanes, left to right.
    pub lane_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intersection: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntersectionAttributes {
    pub lane_group_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadLineAttributes {
    /// Marking type such as `solid_white` or `dashed_yellow`.
    pub marking: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoadEdgeAttributes {
    pub drivable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attributes {
    Lane(Box<LaneAttributes>),
    LaneGroup(LaneGroupAttributes),
    Intersection(IntersectionAttributes),
    RoadLine(RoadLineAttributes),
    RoadEdge(RoadEdgeAttributes),
    /// Free-form record for crosswalks, carparks, walkways, drivable areas, stop zones and speed bumps.
    Generic(BTreeMap<String, serde_json::Value>),
}

impl Attributes {
    pub fn to_json(&self) -> serde_json::Value {
        let v = match self {
            Attributes::Lane(a) => serde_json::to_value(a),
            Attributes::LaneGroup(a) => serde_json::to_value(a),
            Attributes::Intersection(a) => serde_json::to_value(a),
            Attributes::RoadLine(a) => serde_json::to_value(a),
            Attributes::RoadEdge(a) => serde_json::to_value(a),
            Attributes::Generic(a) => serde_json::to_value(a),
        };
        v.expect("attributes serialize")
    }

    pub fn from_json(layer: MapLayer, v: serde_json::Value) -> Result<Self> {
        Ok(match layer {
            MapLayer::Lane => Attributes::Lane(Box::new(serde_json::from_value(v)?)),
            MapLayer::LaneGroup => Attributes::LaneGroup(serde_json::from_value(v)?),
            MapLayer::Intersection => Attributes::Intersection(serde_json::from_value(v)?),
            MapLayer::RoadLine => Attributes::RoadLine(serde_json::from_value(v)?),
            MapLayer::RoadEdge => Attributes::RoadEdge(serde_json::from_value(v)?),
            _ => Attributes::Generic(serde_json::from_value(v)?),
        })
    }

    fn matches(&self, layer: MapLayer) -> bool {
        matches!(
            (self, layer),
            (Attributes::Lane(_), MapLayer::Lane)
                | (Attributes::LaneGroup(_), MapLayer::LaneGroup)
                | (Attributes::Intersection(_), MapLayer::Intersection)
                | (Attributes::RoadLine(_), MapLayer::RoadLine)
                | (Attributes::RoadEdge(_), MapLayer::RoadEdge)
                | (
                    Attributes::Generic(_),
                    MapLayer::Crosswalk
                        | MapLayer::Carpark
                        | MapLayer::Walkway
                        | MapLayer::GenericDrivable
                        | MapLayer::StopZone
                        | MapLayer::SpeedBump
                )
        )
    }

    /// Ids this object refers to, with the field they come from.
    pub fn references(&self) -> Vec<&str> {
        match self {
            Attributes::Lane(a) => a
                .left_boundary
                .iter()
                .chain(&a.right_boundary)
                .chain(&a.predecessors)
                .chain(&a.successors)
                .chain(&a.left_neighbor)
                .chain(&a.right_neighbor)
                .chain(&a.lane_group)
                .map(String::as_str)
                .collect(),
            Attributes::LaneGroup(a) => a.lane_ids.iter().chain(&a.intersection).map(String::as_str).collect(),
            Attributes::Intersection(a) => a.lane_group_ids.iter().map(String::as_str).collect(),
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MapObject {
    pub id: String,
    pub layer: MapLayer,
    pub geometry: Geometry,
    pub attributes: Attributes,
    pub mesh: Option<TriangleMesh>,
}

impl MapObject {
    pub fn new(id: impl Into<String>, layer: MapLayer, geometry: Geometry, attributes: Attributes) -> Result<Self> {
        let o = MapObject { id: id.into(), layer, geometry, attributes, mesh: None };
        o.validate()?;
        Ok(o)
    }

    pub fn with_mesh(mut self, mesh: TriangleMesh) -> Self {
        self.mesh = Some(mesh);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidGeometry("empty object id".into()));
        }
        self.geometry.validate()?;
        let ok = match &self.geometry {
            Geometry::LineString { .. } => self.layer.is_polyline(),
            Geometry::Polygon { .. } => !self.layer.is_polyline(),
            Geometry::Point { .. } => false,
        };
        if !ok {
            return Err(Error::InvalidGeometry(format!(
                "`{}`: {} geometry not allowed in layer {}",
                self.id,
                self.geometry.kind(),
                self.layer
            )));
        }
        if !self.attributes.matches(self.layer) {
            return Err(Error::InvalidGeometry(format!("`{}`: attributes do not belong to layer {}", self.id, self.layer)));
        }
        if let Attributes::Lane(a) = &self.attributes {
            if !matches!(a.centerline, Geometry::LineString { .. }) {
                return Err(Error::InvalidGeometry(format!("`{}`: lane centerline must be a linestring", self.id)));
            }
        }
        if let Some(m) = &self.mesh {
            m.validate()?;
        }
        Ok(())
    }

    pub fn lane(&self) -> Option<&LaneAttributes> {
        match &self.attributes {
            Attributes::Lane(a) => Some(a),
            _ => None,
        }
    }
}
