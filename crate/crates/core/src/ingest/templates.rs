//! Procedural HD maps for synthetic scenarios: a straight multi-lane road and a city grid.

use std::collections::BTreeMap;

use serde_json::json;

use crate::error::Result;
use crate::geom::{Quaternion, Vec3};
use crate::map::{
    Attributes, Coord, Dim, Geometry, IntersectionAttributes, LaneAttributes, LaneGroupAttributes, MapLayer, MapObject,
    RoadEdgeAttributes, RoadLineAttributes,
};

pub const LANE_WIDTH_M: f64 = 3.5;
pub const SPEED_LIMIT_MPS: f64 = 13.9;
const WALKWAY_WIDTH_M: f64 = 3.0;

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Vec<Coord> {
    vec![[x0, y0, 0.0], [x1, y0, 0.0], [x1, y1, 0.0], [x0, y1, 0.0], [x0, y0, 0.0]]
}

fn polygon(ring: Vec<Coord>) -> Result<Geometry> {
    Geometry::polygon(vec![ring], Dim::Xy)
}

fn line(coords: Vec<Coord>) -> Result<Geometry> {
    Geometry::line_string(coords, Dim::Xy)
}

fn generic(kind: &str) -> Attributes {
    Attributes::Generic(BTreeMap::from([("template".to_string(), json!(kind))]))
}

fn lane_attrs(centerline: Geometry) -> LaneAttributes {
    LaneAttributes {
        centerline,
        left_boundary: None,
        right_boundary: None,
        speed_limit: Some(SPEED_LIMIT_MPS),
        predecessors: Vec::new(),
        successors: Vec::new(),
        left_neighbor: None,
        right_neighbor: None,
        lane_group: None,
    }
}

/// Applies a planar rotation by `heading` about the origin to every coordinate.
fn rotate(objects: Vec<MapObject>, heading: f64) -> Result<Vec<MapObject>> {
    if heading == 0.0 {
        return Ok(objects);
    }
    let q = Quaternion::from_yaw(heading);
    let r = |c: Coord| -> Coord { q.rotate(c as Vec3) };
    let map_geom = |g: &Geometry| -> Geometry {
        match g {
            Geometry::Point { dim, coord } => Geometry::Point { dim: *dim, coord: r(*coord) },
            Geometry::LineString { dim, coords } => {
                Geometry::LineString { dim: *dim, coords: coords.iter().map(|c| r(*c)).collect() }
            }
            Geometry::Polygon { dim, rings } => Geometry::Polygon {
                dim: *dim,
                rings: rings.iter().map(|ring| ring.iter().map(|c| r(*c)).collect()).collect(),
            },
        }
    };
    objects
        .into_iter()
        .map(|mut o| {
            o.geometry = map_geom(&o.geometry);
            if let Attributes::Lane(a) = &mut o.attributes {
                a.centerline = map_geom(&a.centerline);
            }
            o.validate()?;
            Ok(o)
        })
        .collect()
}

/// A straight road of `lanes` co-directional lanes running along `heading` from
/// `start_m` for `length_m`, split into `segments` lane groups. The rightmost lane is
/// centered on the axis through the origin.
///
/// Lane ids are `lane_<segment>_<index>` with index 0 the leftmost lane.
pub fn straight_road(start_m: f64, length_m: f64, segments: usize, lanes: usize, heading: f64) -> Result<Vec<MapObject>> {
    assert!(segments >= 1 && lanes >= 1, "road needs at least one segment and one lane");
    let seg_len = length_m / segments as f64;
    // lane i spans y in [top(i+1), top(i)]
    let right = -LANE_WIDTH_M / 2.0;
    let top = |i: usize| right + (lanes - i) as f64 * LANE_WIDTH_M;
    let mut out = Vec::new();
    for s in 0..segments {
        let x0 = start_m + s as f64 * seg_len;
        let x1 = x0 + seg_len;
        let group = format!("lane_group_{s}");
        let edge_l = format!("road_edge_{s}_left");
        let edge_r = format!("road_edge_{s}_right");
        let line_id = |i: usize| format!("road_line_{s}_{i}");
        let lane_id = |seg: usize, i: usize| format!("lane_{seg}_{i}");
        for i in 0..lanes {
            let yc = (top(i) + top(i + 1)) / 2.0;
            let mut a = lane_attrs(line(vec![[x0, yc, 0.0], [x1, yc, 0.0]])?);
            a.left_boundary = Some(if i == 0 { edge_l.clone() } else { line_id(i) });
            a.right_boundary = Some(if i + 1 == lanes { edge_r.clone() } else { line_id(i + 1) });
            if s > 0 {
                a.predecessors.push(lane_id(s - 1, i));
            }
            if s + 1 < segments {
                a.successors.push(lane_id(s + 1, i));
            }
            a.left_neighbor = (i > 0).then(|| lane_id(s, i - 1));
            a.right_neighbor = (i + 1 < lanes).then(|| lane_id(s, i + 1));
            a.lane_group = Some(group.clone());
            out.push(MapObject::new(
                lane_id(s, i),
                MapLayer::Lane,
                polygon(rect(x0, top(i + 1), x1, top(i)))?,
                Attributes::Lane(Box::new(a)),
            )?);
        }
        out.push(MapObject::new(
            group,
            MapLayer::LaneGroup,
            polygon(rect(x0, top(lanes), x1, top(0)))?,
            Attributes::LaneGroup(LaneGroupAttributes { lane_ids: (0..lanes).map(|i| lane_id(s, i)).collect(), intersection: None }),
        )?);
        for i in 1..lanes {
            out.push(MapObject::new(
                line_id(i),
                MapLayer::RoadLine,
                line(vec![[x0, top(i), 0.0], [x1, top(i), 0.0]])?,
                Attributes::RoadLine(RoadLineAttributes { marking: "dashed_white".into() }),
            )?);
        }
        for (id, y) in [(edge_l, top(0)), (edge_r, top(lanes))] {
            out.push(MapObject::new(
                id,
                MapLayer::RoadEdge,
                line(vec![[x0, y, 0.0], [x1, y, 0.0]])?,
                Attributes::RoadEdge(RoadEdgeAttributes { drivable: false }),
            )?);
        }
        for (side, y0, y1) in [("left", top(0), top(0) + WALKWAY_WIDTH_M), ("right", top(lanes) - WALKWAY_WIDTH_M, top(lanes))] {
            out.push(MapObject::new(format!("walkway_{s}_{side}"), MapLayer::Walkway, polygon(rect(x0, y0, x1, y1))?, generic("sidewalk"))?);
        }
    }
    let mid = start_m + length_m / 2.0;
    let (lo, hi) = (top(lanes), top(0));
    out.push(MapObject::new("crosswalk_0", MapLayer::Crosswalk, polygon(rect(mid - 2.0, lo, mid + 2.0, hi))?, generic("zebra"))?);
    out.push(MapObject::new("stop_zone_0", MapLayer::StopZone, polygon(rect(mid - 5.0, lo, mid - 3.0, hi))?, generic("stop_line"))?);
    let bump = start_m + length_m / 4.0;
    out.push(MapObject::new("speed_bump_0", MapLayer::SpeedBump, polygon(rect(bump - 0.5, lo, bump + 0.5, hi))?, generic("hump"))?);
    out.push(MapObject::new(
        "generic_drivable_0",
        MapLayer::GenericDrivable,
        polygon(rect(start_m, lo, start_m + length_m, hi))?,
        generic("road_surface"),
    )?);
    let park_y = hi + WALKWAY_WIDTH_M;
    out.push(MapObject::new("carpark_0", MapLayer::Carpark, polygon(rect(mid - 15.0, park_y, mid + 15.0, park_y + 20.0))?, generic("lot"))?);
    rotate(out, heading)
}

/// Compass direction of a lane in the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    East,
    West,
    North,
    South,
}

impl Dir {
    const ALL: [Dir; 4] = [Dir::East, Dir::West, Dir::North, Dir::South];

    fn tag(self) -> &'static str {
        match self {
            Dir::East => "e",
            Dir::West => "w",
            Dir::North => "n",
            Dir::South => "s",
        }
    }

    fn step(self) -> (i64, i64) {
        match self {
            Dir::East => (1, 0),
            Dir::West => (-1, 0),
            Dir::North => (0, 1),
            Dir::South => (0, -1),
        }
    }
}

/// Two-way city grid with intersections at `(i, j) * block_m` for `i, j` in
/// `-blocks..=blocks`. Each street carries one lane per direction (right-hand
/// traffic); each intersection holds four straight-through connector lanes.
pub fn grid_map(blocks: usize, block_m: f64) -> Result<Vec<MapObject>> {
    let k = blocks as i64;
    let h = LANE_WIDTH_M * 2.0;
    let inside = |i: i64, j: i64| i.abs() <= k && j.abs() <= k;
    let node = |i: i64, j: i64| format!("{i}_{j}");
    let street_lane = |i: i64, j: i64, d: Dir| format!("lane_{}_{}", node(i, j), d.tag());
    let conn_lane = |i: i64, j: i64, d: Dir| format!("lane_x{}_{}", node(i, j), d.tag());
    let w = LANE_WIDTH_M;

    // Lane polygon and centerline between two intersections (or across one, for connectors).
    let lane_geom = |cx: f64, cy: f64, d: Dir, from: f64, to: f64| -> Result<(Geometry, Geometry)> {
        // right-hand traffic: eastbound on the south half, northbound on the east half
        let (poly, cl) = match d {
            Dir::East => (rect(cx + from, cy - w, cx + to, cy), vec![[cx + from, cy - w / 2.0, 0.0], [cx + to, cy - w / 2.0, 0.0]]),
            Dir::West => (rect(cx - to, cy, cx - from, cy + w), vec![[cx - from, cy + w / 2.0, 0.0], [cx - to, cy + w / 2.0, 0.0]]),
            Dir::North => (rect(cx, cy + from, cx + w, cy + to), vec![[cx + w / 2.0, cy + from, 0.0], [cx + w / 2.0, cy + to, 0.0]]),
            Dir::South => (rect(cx - w, cy - to, cx, cy - from), vec![[cx - w / 2.0, cy - from, 0.0], [cx - w / 2.0, cy - to, 0.0]]),
        };
        Ok((polygon(poly)?, line(cl)?))
    };

    let mut out = Vec::new();
    for i in -k..=k {
        for j in -k..=k {
            let (cx, cy) = (i as f64 * block_m, j as f64 * block_m);
            let nid = node(i, j);
            let mut groups = Vec::new();
            for d in Dir::ALL {
                let (di, dj) = d.step();
                let id = conn_lane(i, j, d);
                let (poly, cl) = lane_geom(cx, cy, d, -h, h)?;
                let mut a = lane_attrs(cl);
                // the street lane entering this intersection starts at the previous node
                if inside(i - di, j - dj) {
                    a.predecessors.push(street_lane(i - di, j - dj, d));
                }
                if inside(i + di, j + dj) {
                    a.successors.push(street_lane(i, j, d));
                }
                let group = format!("lane_group_x{nid}_{}", d.tag());
                a.lane_group = Some(group.clone());
                out.push(MapObject::new(id.clone(), MapLayer::Lane, poly.clone(), Attributes::Lane(Box::new(a)))?);
                out.push(MapObject::new(
                    group.clone(),
                    MapLayer::LaneGroup,
                    poly,
                    Attributes::LaneGroup(LaneGroupAttributes { lane_ids: vec![id], intersection: Some(format!("intersection_{nid}")) }),
                )?);
                groups.push(group);
            }
            out.push(MapObject::new(
                format!("intersection_{nid}"),
                MapLayer::Intersection,
                polygon(rect(cx - h, cy - h, cx + h, cy + h))?,
                Attributes::Intersection(IntersectionAttributes { lane_group_ids: groups }),
            )?);
            for (q, d) in Dir::ALL.into_iter().enumerate() {
                let (di, dj) = d.step();
                if !inside(i + di, j + dj) {
                    continue;
                }
                // crosswalk across the outgoing street, just outside the intersection box
                let (sx, sy) = (di as f64, dj as f64);
                let (a0, a1) = (h, h + 3.0);
                let ring = if dj == 0 {
                    rect(cx + sx * a0, cy - w, cx + sx * a1, cy + w)
                } else {
                    rect(cx - w, cy + sy * a0, cx + w, cy + sy * a1)
                };
                let ring = normalize_rect(ring);
                out.push(MapObject::new(format!("crosswalk_{nid}_{q}"), MapLayer::Crosswalk, polygon(ring)?, generic("zebra"))?);
            }
            // streets leaving this node eastward and northward
            for d in [Dir::East, Dir::North] {
                let (di, dj) = d.step();
                if !inside(i + di, j + dj) {
                    continue;
                }
                let back = if d == Dir::East { Dir::West } else { Dir::South };
                let sid = format!("{nid}_{}", d.tag());
                let center = format!("road_line_{sid}");
                let edges = [format!("road_edge_{sid}_a"), format!("road_edge_{sid}_b")];
                let (from, to) = (h, block_m - h);
                for (lane_dir, ni, nj) in [(d, i, j), (back, i + di, j + dj)] {
                    let (ox, oy) = (ni as f64 * block_m, nj as f64 * block_m);
                    let (ldi, ldj) = lane_dir.step();
                    let id = street_lane(ni, nj, lane_dir);
                    let (poly, cl) = lane_geom(ox, oy, lane_dir, from, to)?;
                    let mut a = lane_attrs(cl);
                    a.predecessors.push(conn_lane(ni, nj, lane_dir));
                    a.successors.push(conn_lane(ni + ldi, nj + ldj, lane_dir));
                    a.left_boundary = Some(center.clone());
                    a.right_boundary = Some(if lane_dir == d { edges[0].clone() } else { edges[1].clone() });
                    let group = format!("lane_group_{}_{}", node(ni, nj), lane_dir.tag());
                    a.lane_group = Some(group.clone());
                    out.push(MapObject::new(id.clone(), MapLayer::Lane, poly.clone(), Attributes::Lane(Box::new(a)))?);
                    out.push(MapObject::new(
                        group,
                        MapLayer::LaneGroup,
                        poly,
                        Attributes::LaneGroup(LaneGroupAttributes { lane_ids: vec![id], intersection: None }),
                    )?);
                }
                let (x0, y0, x1, y1) = if d == Dir::East { (cx + from, cy, cx + to, cy) } else { (cx, cy + from, cx, cy + to) };
                out.push(MapObject::new(
                    center,
                    MapLayer::RoadLine,
                    line(vec![[x0, y0, 0.0], [x1, y1, 0.0]])?,
                    Attributes::RoadLine(RoadLineAttributes { marking: "double_yellow".into() }),
                )?);
                // edge a is on the right of the outbound lane, edge b on the right of the return lane
                let (nx, ny) = if d == Dir::East { (0.0, -w) } else { (w, 0.0) };
                for (id, s) in [(&edges[0], 1.0), (&edges[1], -1.0)] {
                    out.push(MapObject::new(
                        id.clone(),
                        MapLayer::RoadEdge,
                        line(vec![[x0 + s * nx, y0 + s * ny, 0.0], [x1 + s * nx, y1 + s * ny, 0.0]])?,
                        Attributes::RoadEdge(RoadEdgeAttributes { drivable: false }),
                    )?);
                    let (wx, wy) = (s * nx / w * WALKWAY_WIDTH_M, s * ny / w * WALKWAY_WIDTH_M);
                    let ring = normalize_rect(rect(x0 + s * nx, y0 + s * ny, x1 + s * nx + wx, y1 + s * ny + wy));
                    let side = if s > 0.0 { "a" } else { "b" };
                    out.push(MapObject::new(format!("walkway_{sid}_{side}"), MapLayer::Walkway, polygon(ring)?, generic("sidewalk"))?);
                }
                // stop zone at the end of the outbound lane, before the next intersection
                let ring = if d == Dir::East {
                    rect(cx + to - 2.0, cy - w, cx + to, cy)
                } else {
                    rect(cx, cy + to - 2.0, cx + w, cy + to)
                };
                out.push(MapObject::new(format!("stop_zone_{sid}"), MapLayer::StopZone, polygon(ring)?, generic("stop_line"))?);
            }
            if i < k && j < k {
                let (bx, by) = (cx + block_m / 2.0, cy + block_m / 2.0);
                out.push(MapObject::new(
                    format!("carpark_{nid}"),
                    MapLayer::Carpark,
                    polygon(rect(bx - 15.0, by - 10.0, bx + 15.0, by + 10.0))?,
                    generic("lot"),
                )?);
            }
        }
    }
    Ok(out)
}

/// Reorders an axis-aligned rectangle ring so min corner comes first (counter-clockwise).
fn normalize_rect(ring: Vec<Coord>) -> Vec<Coord> {
    let xs = ring.iter().map(|c| c[0]);
    let ys = ring.iter().map(|c| c[1]);
    let (x0, x1) = xs.clone().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    let (y0, y1) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), y| (a.min(y), b.max(y)));
    rect(x0, y0, x1, y1)
}
