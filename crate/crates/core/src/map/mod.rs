//! HD-map objects, WKB geometry, the STR-tree index and the map file.

mod geojson;
mod geometry;
mod mesh;
mod object;
mod store;
mod strtree;
mod wkb;

pub use geojson::{export_geojson, feature_to_object, import_geojson, object_to_feature, to_feature_collections};
pub use geometry::{segment_distance, Coord, Dim, Geometry, Rect};
pub use mesh::{triangulate, TriangleMesh};
pub use object::{
    Attributes, IntersectionAttributes, LaneAttributes, LaneGroupAttributes, MapLayer, MapObject, RoadEdgeAttributes,
    RoadLineAttributes,
};
pub use store::{load_map, write_map, MapScope, MapStore};
pub use strtree::{StrTree, DEFAULT_NODE_CAPACITY};
pub use wkb::{wkb_decode, wkb_encode};
