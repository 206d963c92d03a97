//! Helpers shared by integration tests: random maps, brute-force map queries and
//! small converted corpora.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use d123_core::ingest::{convert, synthesize, ConvertOptions, SyntheticScenarioConfig};

use d123_core::map::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn attributes_for(layer: MapLayer, rng: &mut impl Rng, center: [f64; 2]) -> Attributes {
    match layer {
        MapLayer::Lane => Attributes::Lane(Box::new(LaneAttributes {
            centerline: Geometry::line_string(
                vec![[center[0] - 1.0, center[1], 0.0], [center[0] + 1.0, center[1], 0.0]],
                Dim::Xy,
            )
            .unwrap(),
            left_boundary: None,
            right_boundary: None,
            speed_limit: rng.gen_bool(0.5).then(|| rng.gen_range(5.0..30.0)),
            predecessors: vec![],
            successors: vec![],
            left_neighbor: None,
            right_neighbor: None,
            lane_group: None,
        })),
        MapLayer::LaneGroup => Attributes::LaneGroup(LaneGroupAttributes { lane_ids: vec![], intersection: None }),
        MapLayer::Intersection => Attributes::Intersection(IntersectionAttributes { lane_group_ids: vec![] }),
        MapLayer::RoadLine => Attributes::RoadLine(RoadLineAttributes { marking: "dashed_white".into() }),
        MapLayer::RoadEdge => Attributes::RoadEdge(RoadEdgeAttributes { drivable: rng.gen_bool(0.5) }),
        _ => Attributes::Generic(BTreeMap::from([("source".to_string(), serde_json::json!("random"))])),
    }
}

/// Random objects over a square whose side grows with sqrt(n), so density is constant.
pub fn random_map(n: usize, seed: u64) -> Vec<MapObject> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let side = (n as f64).sqrt() * 25.0 + 50.0;
    (0..n)
        .map(|i| {
            let layer = MapLayer::ALL[rng.gen_range(0..MapLayer::ALL.len())];
            let c = [rng.gen_range(0.0..side), rng.gen_range(0.0..side)];
            let dim = if rng.gen_bool(0.3) { Dim::Xyz } else { Dim::Xy };
            let z = if dim == Dim::Xyz { rng.gen_range(-2.0..2.0) } else { 0.0 };
            let k = rng.gen_range(3..8);
            let r = rng.gen_range(0.5..12.0);
            let mut angles: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect();
            angles.sort_by(f64::total_cmp);
            let pts: Vec<Coord> = angles
                .iter()
                .map(|a| {
                    let rr = r * rng.gen_range(0.4..1.0);
                    [c[0] + rr * a.cos(), c[1] + rr * a.sin(), z]
                })
                .collect();
            let geometry = if layer.is_polyline() {
                Geometry::line_string(pts, dim).unwrap()
            } else {
                Geometry::polygon(vec![pts], dim).unwrap()
            };
            let attributes = attributes_for(layer, &mut rng, c);
            MapObject::new(format!("obj_{i:06}"), layer, geometry, attributes).unwrap()
        })
        .collect()
}

pub fn brute_radius<'a>(objs: &'a [MapObject], p: [f64; 2], r: f64, layers: &[MapLayer]) -> Vec<&'a str> {
    let mut v: Vec<&MapObject> =
        objs.iter().filter(|o| layers.contains(&o.layer) && o.geometry.distance_xy(p) <= r).collect();
    v.sort_by(|a, b| a.layer.cmp(&b.layer).then_with(|| a.id.cmp(&b.id)));
    v.into_iter().map(|o| o.id.as_str()).collect()
}

pub fn brute_bbox<'a>(objs: &'a [MapObject], q: &Rect, layers: &[MapLayer]) -> Vec<&'a str> {
    let mut v: Vec<&MapObject> =
        objs.iter().filter(|o| layers.contains(&o.layer) && o.geometry.bbox().intersects(q)).collect();
    v.sort_by(|a, b| a.layer.cmp(&b.layer).then_with(|| a.id.cmp(&b.id)));
    v.into_iter().map(|o| o.id.as_str()).collect()
}

pub fn brute_nearest(objs: &[MapObject], p: [f64; 2], layer: MapLayer) -> Option<(&str, f64)> {
    objs.iter()
        .filter(|o| o.layer == layer)
        .map(|o| (o.id.as_str(), o.geometry.distance_xy(p)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)))
}

pub fn ids<'a>(v: &[&'a MapObject]) -> Vec<&'a str> {
    v.iter().map(|o| o.id.as_str()).collect()
}

/// Converts `n` synthetic logs into `<root>/<split>/`, cycling through `presets`.
pub fn synthetic_corpus(root: &Path, split: &str, n: usize, presets: &[&str], duration_s: f64, seed: u64) -> Vec<PathBuf> {
    (0..n)
        .map(|i| {
            let cfg = SyntheticScenarioConfig {
                seed: seed + i as u64,
                log_id: format!("{split}_{i:04}"),
                duration_s,
                lidar_points: 16,
                ..Default::default()
            }
            .with_preset(presets[i % presets.len()])
            .unwrap();
            let (log, _) = synthesize(&cfg).unwrap();
            convert(&log, &root.join(split), &ConvertOptions::default()).unwrap()
        })
        .collect()
}
