//! GeoJSON export (one FeatureCollection per layer) and import.
//!
//! Each feature carries `properties.layer`, `properties.attributes` and, when
//! present, `properties.mesh`, so a single file may also hold mixed layers.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{json, Value};

use super::geometry::Geometry;
use super::mesh::TriangleMesh;
use super::object::{Attributes, MapLayer, MapObject};
use super::store::{MapScope, MapStore};
use crate::error::{Error, IoContext, Result};

pub fn object_to_feature(o: &MapObject) -> Value {
    let mut props = json!({"layer": o.layer.as_str(), "attributes": o.attributes.to_json()});
    if let Some(m) = &o.mesh {
        props["mesh"] = serde_json::to_value(m).expect("mesh serializes");
    }
    json!({"type": "Feature", "id": o.id, "geometry": o.geometry.to_geojson(), "properties": props})
}

pub fn feature_to_object(f: &Value, default_layer: Option<MapLayer>) -> Result<MapObject> {
    let bad = |m: String| Error::InvalidGeometry(format!("GeoJSON feature: {m}"));
    let id = match f.get("id") {
        Some(Value::String(s)) => s.clone(),
        Some(Value::Number(n)) => n.to_string(),
        _ => return Err(bad("missing id".into())),
    };
    let props = f.get("properties").cloned().unwrap_or(Value::Null);
    let layer = match props.get("layer").and_then(Value::as_str) {
        Some(l) => l.parse()?,
        None => default_layer.ok_or_else(|| bad(format!("`{id}` has no layer")))?,
    };
    let geometry = Geometry::from_geojson(f.get("geometry").ok_or_else(|| bad(format!("`{id}` has no geometry")))?)?;
    let attrs = props.get("attributes").cloned().unwrap_or_else(|| json!({}));
    let attributes = Attributes::from_json(layer, attrs).map_err(|e| bad(format!("`{id}` attributes: {e}")))?;
    let mut o = MapObject::new(id, layer, geometry, attributes)?;
    if let Some(m) = props.get("mesh") {
        let mesh: TriangleMesh = serde_json::from_value(m.clone())?;
        mesh.validate()?;
        o.mesh = Some(mesh);
    }
    Ok(o)
}

/// Feature collections keyed by layer, objects in stored order.
pub fn to_feature_collections(store: &MapStore) -> Result<BTreeMap<MapLayer, Value>> {
    let mut by_layer: BTreeMap<MapLayer, Vec<Value>> = BTreeMap::new();
    for o in store.objects()? {
        by_layer.entry(o.layer).or_default().push(object_to_feature(o));
    }
    Ok(by_layer.into_iter().map(|(l, f)| (l, json!({"type": "FeatureCollection", "features": f}))).collect())
}

/// Writes `<layer>.geojson` for every non-empty layer into `dir`.
pub fn export_geojson(store: &MapStore, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).at(dir)?;
    for (layer, fc) in to_feature_collections(store)? {
        let path = dir.join(format!("{layer}.geojson"));
        std::fs::write(&path, serde_json::to_vec_pretty(&fc)?).at(&path)?;
    }
    Ok(())
}

fn read_collection(path: &Path, layer: Option<MapLayer>, out: &mut Vec<MapObject>) -> Result<()> {
    let text = std::fs::read_to_string(path).at(path)?;
    let v: Value = serde_json::from_str(&text)?;
    let features = v
        .get("features")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::InvalidGeometry(format!("{} is not a FeatureCollection", path.display())))?;
    for f in features {
        out.push(feature_to_object(f, layer)?);
    }
    Ok(())
}

/// Reads a single FeatureCollection file, or every `*.geojson` file of a directory
/// (file stem naming the default layer).
pub fn import_geojson(path: &Path, scope: MapScope) -> Result<MapStore> {
    let mut objects = Vec::new();
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .at(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|e| e == "geojson"))
            .collect();
        files.sort();
        for f in files {
            let layer = f.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok());
            read_collection(&f, layer, &mut objects)?;
        }
    } else {
        read_collection(path, None, &mut objects)?;
    }
    MapStore::new(objects, scope)
}
