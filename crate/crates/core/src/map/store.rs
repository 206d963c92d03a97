use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use arrow_array::builder::BinaryBuilder;
use arrow_array::cast::AsArray;
use arrow_array::types::Float64Type;
use arrow_array::{Array, ArrayRef, BinaryArray, Float64Array, RecordBatch, StringArray};
use arrow_schema::{DataType, Field, Schema};
use serde::{Deserialize, Serialize};

use super::geometry::Rect;
use super::mesh::TriangleMesh;
use super::object::{Attributes, MapLayer, MapObject};
use super::strtree::{StrTree, DEFAULT_NODE_CAPACITY};
use super::wkb::{wkb_decode, wkb_encode};
use crate::error::{Error, Result};
use crate::log::{row_groups, write_ipc_file, IpcFile, ReadStats, FORMAT_VERSION, META_FORMAT_VERSION, META_MAP};

/// Whether a map belongs to one log or is shared across a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MapScope {
    #[default]
    PerLog,
    DatasetWide,
}

#[derive(Debug, Serialize, Deserialize)]
struct MapFileInfo {
    scope: MapScope,
}

/// Geometry, attribute and mesh columns kept from the map file for on-demand decode.
#[derive(Debug)]
struct RawColumns {
    path: PathBuf,
    batches: Vec<RecordBatch>,
    starts: Vec<usize>,
}

impl RawColumns {
    fn decode(&self, i: usize, id: &str, layer: MapLayer) -> Result<MapObject> {
        let b = self.starts.partition_point(|&s| s <= i) - 1;
        let (batch, row) = (&self.batches[b], i - self.starts[b]);
        let wkb = batch.column(2).as_binary::<i32>().value(row);
        let attrs = batch.column(3).as_string::<i32>().value(row);
        let mesh_col = batch.column(4).as_binary::<i32>();
        let geometry = wkb_decode(wkb)?;
        let attr_json: serde_json::Value =
            serde_json::from_str(attrs).map_err(|e| Error::corrupt(&self.path, format!("attributes of `{id}`: {e}")))?;
        let attributes =
            Attributes::from_json(layer, attr_json).map_err(|e| Error::corrupt(&self.path, format!("attributes of `{id}`: {e}")))?;
        let mesh = if mesh_col.is_valid(row) {
            Some(TriangleMesh::from_bytes(mesh_col.value(row)).map_err(|e| Error::corrupt(&self.path, e))?)
        } else {
            None
        };
        let o = MapObject { id: id.to_string(), layer, geometry, attributes, mesh };
        o.validate().map_err(|e| Error::corrupt(&self.path, e))?;
        Ok(o)
    }
}

/// Vector map with one STR tree per layer. Object geometry is decoded on first use.
#[derive(Debug)]
pub struct MapStore {
    scope: MapScope,
    ids: Vec<String>,
    layers: Vec<MapLayer>,
    rects: Vec<Rect>,
    by_id: HashMap<String, u32>,
    trees: BTreeMap<MapLayer, StrTree>,
    cells: Vec<OnceLock<MapObject>>,
    raw: Option<RawColumns>,
    decoded: AtomicU64,
}

impl MapStore {
    pub fn new(objects: Vec<MapObject>, scope: MapScope) -> Result<Self> {
        Self::with_capacity(objects, scope, DEFAULT_NODE_CAPACITY)
    }

    pub fn with_capacity(objects: Vec<MapObject>, scope: MapScope, capacity: usize) -> Result<Self> {
        for o in &objects {
            o.validate()?;
        }
        let ids = objects.iter().map(|o| o.id.clone()).collect();
        let layers = objects.iter().map(|o| o.layer).collect();
        let rects = objects.iter().map(|o| o.geometry.bbox()).collect();
        let cells = objects
            .into_iter()
            .map(|o| {
                let c = OnceLock::new();
                let _ = c.set(o);
                c
            })
            .collect();
        Self::assemble(scope, ids, layers, rects, cells, None, capacity)
    }

    fn assemble(
        scope: MapScope,
        ids: Vec<String>,
        layers: Vec<MapLayer>,
        rects: Vec<Rect>,
        cells: Vec<OnceLock<MapObject>>,
        raw: Option<RawColumns>,
        capacity: usize,
    ) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if by_id.insert(id.clone(), i as u32).is_some() {
                return Err(Error::DuplicateId(id.clone()));
            }
        }
        let mut per_layer: BTreeMap<MapLayer, Vec<(Rect, u32)>> = BTreeMap::new();
        for (i, (l, r)) in layers.iter().zip(&rects).enumerate() {
            per_layer.entry(*l).or_default().push((*r, i as u32));
        }
        let trees = per_layer
            .into_iter()
            .map(|(l, items)| (l, StrTree::build(items, capacity, |v| ids[v as usize].clone())))
            .collect();
        Ok(MapStore { scope, ids, layers, rects, by_id, trees, cells, raw, decoded: AtomicU64::new(0) })
    }

    pub fn scope(&self) -> MapScope {
        self.scope
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn layer_len(&self, layer: MapLayer) -> usize {
        self.trees.get(&layer).map_or(0, StrTree::len)
    }

    pub fn tree(&self, layer: MapLayer) -> Option<&StrTree> {
        self.trees.get(&layer)
    }

    pub fn bbox(&self, i: usize) -> Rect {
        self.rects[i]
    }

    /// Objects decoded from the map file so far.
    pub fn decode_count(&self) -> u64 {
        self.decoded.load(Ordering::Relaxed)
    }

    fn object_at(&self, i: usize) -> Result<&MapObject> {
        if let Some(o) = self.cells[i].get() {
            return Ok(o);
        }
        let raw = self.raw.as_ref().expect("in-memory objects are always present");
        let o = raw.decode(i, &self.ids[i], self.layers[i])?;
        if self.cells[i].set(o).is_ok() {
            self.decoded.fetch_add(1, Ordering::Relaxed);
        }
        Ok(self.cells[i].get().unwrap())
    }

    pub fn get(&self, id: &str) -> Result<&MapObject> {
        let i = *self.by_id.get(id).ok_or_else(|| Error::UnknownId(id.to_string()))?;
        self.object_at(i as usize)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.by_id.contains_key(id)
    }

    /// All objects in stored order, decoding any not yet decoded.
    pub fn objects(&self) -> Result<Vec<&MapObject>> {
        (0..self.len()).map(|i| self.object_at(i)).collect()
    }

    fn sorted(&self, mut idx: Vec<u32>) -> Result<Vec<&MapObject>> {
        idx.sort_by(|&a, &b| {
            let (a, b) = (a as usize, b as usize);
            self.layers[a].cmp(&self.layers[b]).then_with(|| self.ids[a].cmp(&self.ids[b]))
        });
        idx.into_iter().map(|i| self.object_at(i as usize)).collect()
    }

    /// Objects of `layers` within `radius` of `p` in the xy-plane, ordered by layer then id.
    pub fn objects_in_radius(&self, p: [f64; 2], radius: f64, layers: &[MapLayer]) -> Result<Vec<&MapObject>> {
        if !(radius >= 0.0) || !p.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidGeometry(format!("radius query needs a finite point and radius >= 0, got {radius}")));
        }
        let mut hits = Vec::new();
        for layer in dedup(layers) {
            let Some(tree) = self.trees.get(&layer) else { continue };
            for i in tree.query_radius(p, radius) {
                if self.object_at(i as usize)?.geometry.distance_xy(p) <= radius {
                    hits.push(i);
                }
            }
        }
        self.sorted(hits)
    }

    /// Radius query with layer names; `point` may carry a z that is ignored.
    pub fn get_map_objects_in_radius(&self, point: [f64; 3], radius: f64, layers: &[&str]) -> Result<Vec<&MapObject>> {
        let layers = layers.iter().map(|l| l.parse()).collect::<Result<Vec<MapLayer>>>()?;
        self.objects_in_radius([point[0], point[1]], radius, &layers)
    }

    /// Objects of `layers` whose bounding rectangle intersects `rect`.
    pub fn objects_in_bbox(&self, rect: &Rect, layers: &[MapLayer]) -> Result<Vec<&MapObject>> {
        let hits = dedup(layers)
            .into_iter()
            .filter_map(|l| self.trees.get(&l))
            .flat_map(|t| t.query_rect(rect))
            .collect();
        self.sorted(hits)
    }

    /// Objects of `layers` whose geometry contains or touches `p`.
    pub fn objects_at_point(&self, p: [f64; 2], layers: &[MapLayer]) -> Result<Vec<&MapObject>> {
        self.objects_in_radius(p, 0.0, layers)
    }

    /// Closest object of `layer`, ties broken by the smaller id. Searches with a
    /// doubling radius until a candidate lies within the searched radius.
    pub fn nearest(&self, p: [f64; 2], layer: MapLayer) -> Result<(&MapObject, f64)> {
        let tree = self.trees.get(&layer).ok_or_else(|| Error::LayerEmpty(layer.to_string()))?;
        let root = tree.root_rect().unwrap();
        let mut radius = root.distance_to(p) + root.diagonal() / (tree.len() as f64).sqrt();
        if !(radius > 0.0) {
            radius = f64::MIN_POSITIVE;
        }
        loop {
            let mut best: Option<(f64, u32)> = None;
            for i in tree.query_radius(p, radius) {
                let d = self.object_at(i as usize)?.geometry.distance_xy(p);
                let better = match best {
                    None => true,
                    Some((bd, bi)) => d < bd || (d == bd && self.ids[i as usize] < self.ids[bi as usize]),
                };
                if better {
                    best = Some((d, i));
                }
            }
            if let Some((d, i)) = best {
                if d <= radius {
                    return Ok((self.object_at(i as usize)?, d));
                }
            }
            radius *= 2.0;
        }
    }

    fn lane(&self, id: &str) -> Result<&super::object::LaneAttributes> {
        self.get(id)?.lane().ok_or_else(|| Error::UnknownId(format!("{id} (not a lane)")))
    }

    fn resolve(&self, from: &str, ids: &[String]) -> Result<Vec<&MapObject>> {
        ids.iter()
            .map(|t| {
                self.get(t).map_err(|_| Error::DanglingReference { from: from.to_string(), missing: t.clone() })
            })
            .collect()
    }

    pub fn lane_successors(&self, lane_id: &str) -> Result<Vec<&MapObject>> {
        let a = self.lane(lane_id)?;
        self.resolve(lane_id, &a.successors)
    }

    pub fn lane_predecessors(&self, lane_id: &str) -> Result<Vec<&MapObject>> {
        let a = self.lane(lane_id)?;
        self.resolve(lane_id, &a.predecessors)
    }

    /// Left and right neighbor lanes.
    pub fn lane_neighbors(&self, lane_id: &str) -> Result<(Option<&MapObject>, Option<&MapObject>)> {
        let a = self.lane(lane_id)?;
        let one = |n: &Option<String>| -> Result<Option<&MapObject>> {
            Ok(self.resolve(lane_id, n.as_slice())?.into_iter().next())
        };
        Ok((one(&a.left_neighbor)?, one(&a.right_neighbor)?))
    }

    /// One `DanglingReference` per reference that does not resolve.
    pub fn validate(&self) -> Result<Vec<Error>> {
        let mut out = Vec::new();
        for o in self.objects()? {
            for r in o.attributes.references() {
                if !self.contains(r) {
                    out.push(Error::DanglingReference { from: o.id.clone(), missing: r.to_string() });
                }
            }
        }
        Ok(out)
    }
}

fn dedup(layers: &[MapLayer]) -> Vec<MapLayer> {
    let mut v = layers.to_vec();
    v.sort();
    v.dedup();
    v
}

const BBOX: [&str; 4] = ["min_x", "min_y", "max_x", "max_y"];

fn map_schema(scope: MapScope) -> Arc<Schema> {
    let mut fields = vec![
        Field::new("id", DataType::Utf8, false),
        Field::new("layer", DataType::Utf8, false),
        Field::new("wkb", DataType::Binary, false),
        Field::new("attributes", DataType::Utf8, false),
        Field::new("mesh", DataType::Binary, true),
    ];
    fields.extend(BBOX.iter().map(|n| Field::new(*n, DataType::Float64, false)));
    let meta = HashMap::from([
        (META_MAP.to_string(), serde_json::to_string(&MapFileInfo { scope }).unwrap()),
        (META_FORMAT_VERSION.to_string(), FORMAT_VERSION.to_string()),
    ]);
    Arc::new(Schema::new_with_metadata(fields, meta))
}

/// Writes the map as one IPC file with a row per object.
pub fn write_map(store: &MapStore, path: &Path) -> Result<()> {
    let objects = store.objects()?;
    let schema = map_schema(store.scope);
    let batches = row_groups(objects.len())
        .map(|r| {
            let objs = &objects[r];
            let mut wkb = BinaryBuilder::new();
            let mut mesh = BinaryBuilder::new();
            for o in objs {
                wkb.append_value(wkb_encode(&o.geometry));
                mesh.append_option(o.mesh.as_ref().map(TriangleMesh::to_bytes));
            }
            let rects: Vec<Rect> = objs.iter().map(|o| o.geometry.bbox()).collect();
            let mut cols: Vec<ArrayRef> = vec![
                Arc::new(StringArray::from_iter_values(objs.iter().map(|o| o.id.as_str()))),
                Arc::new(StringArray::from_iter_values(objs.iter().map(|o| o.layer.as_str()))),
                Arc::new(wkb.finish()),
                Arc::new(StringArray::from_iter_values(objs.iter().map(|o| o.attributes.to_json().to_string()))),
                Arc::new(mesh.finish()),
            ];
            cols.push(Arc::new(Float64Array::from_iter_values(rects.iter().map(|r| r.min[0]))));
            cols.push(Arc::new(Float64Array::from_iter_values(rects.iter().map(|r| r.min[1]))));
            cols.push(Arc::new(Float64Array::from_iter_values(rects.iter().map(|r| r.max[0]))));
            cols.push(Arc::new(Float64Array::from_iter_values(rects.iter().map(|r| r.max[1]))));
            Ok(RecordBatch::try_new(schema.clone(), cols)?)
        })
        .collect::<Result<Vec<_>>>()?;
    write_ipc_file(path, &schema, &batches)
}

/// Loads a map file. The index is built from the bounding-box columns; geometry
/// and attributes are decoded per object when first returned.
pub fn load_map(path: &Path) -> Result<MapStore> {
    let file = IpcFile::open(path, ReadStats::new())?;
    let info: MapFileInfo = file
        .metadata()
        .get(META_MAP)
        .ok_or_else(|| Error::corrupt(path, "not a map file"))
        .and_then(|s| serde_json::from_str(s).map_err(|e| Error::corrupt(path, e)))?;
    let expected = map_schema(info.scope);
    let ok = file.schema().fields().len() == expected.fields().len()
        && file.schema().fields().iter().zip(expected.fields()).all(|(a, b)| a.name() == b.name() && a.data_type() == b.data_type());
    if !ok {
        return Err(Error::corrupt(path, "columns do not match the map schema"));
    }
    let batches = file.read_all_index()?;
    let n = file.num_rows();
    let (mut ids, mut layers, mut rects, mut starts) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n), Vec::new());
    for b in &batches {
        starts.push(ids.len());
        let id = b.column(0).as_string::<i32>();
        let layer = b.column(1).as_string::<i32>();
        let bb: Vec<&Float64Array> = (5..9).map(|k| b.column(k).as_primitive::<Float64Type>()).collect();
        let wkb: &BinaryArray = b.column(2).as_binary::<i32>();
        if id.null_count() + layer.null_count() + wkb.null_count() > 0 {
            return Err(Error::corrupt(path, "null id, layer or geometry"));
        }
        for r in 0..b.num_rows() {
            ids.push(id.value(r).to_string());
            layers.push(layer.value(r).parse::<MapLayer>().map_err(|e| Error::corrupt(path, e))?);
            let rect = Rect::new([bb[0].value(r), bb[1].value(r)], [bb[2].value(r), bb[3].value(r)]);
            if !(rect.min.iter().chain(&rect.max).all(|v| v.is_finite()) && !rect.is_empty()) {
                return Err(Error::corrupt(path, format!("bad bounding box for `{}`", id.value(r))));
            }
            rects.push(rect);
        }
    }
    let cells = (0..n).map(|_| OnceLock::new()).collect();
    let raw = RawColumns { path: path.to_path_buf(), batches, starts };
    MapStore::assemble(info.scope, ids, layers, rects, cells, Some(raw), DEFAULT_NODE_CAPACITY).map_err(|e| match e {
        Error::DuplicateId(id) => Error::corrupt(path, format!("duplicate object id `{id}`")),
        other => other,
    })
}
