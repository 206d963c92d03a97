use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub type Coord = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Dim {
    Xy,
    Xyz,
}

impl Dim {
    pub fn size(self) -> usize {
        match self {
            Dim::Xy => 2,
            Dim::Xyz => 3,
        }
    }
}

/// Vector geometry. Two-dimensional coordinates keep `z = 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum Geometry {
    Point { dim: Dim, coord: Coord },
    LineString { dim: Dim, coords: Vec<Coord> },
    /// Exterior ring first, then holes. Rings are closed.
    Polygon { dim: Dim, rings: Vec<Vec<Coord>> },
}

/// Axis-aligned rectangle in the xy-plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub const EMPTY: Rect = Rect { min: [f64::INFINITY; 2], max: [f64::NEG_INFINITY; 2] };

    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Rect { min, max }
    }

    pub fn from_point(p: [f64; 2]) -> Self {
        Rect { min: p, max: p }
    }

    pub fn around(center: [f64; 2], radius: f64) -> Self {
        Rect::new([center[0] - radius, center[1] - radius], [center[0] + radius, center[1] + radius])
    }

    pub fn is_empty(&self) -> bool {
        self.min[0] > self.max[0] || self.min[1] > self.max[1]
    }

    pub fn expand_point(&mut self, p: [f64; 2]) {
        self.min = [self.min[0].min(p[0]), self.min[1].min(p[1])];
        self.max = [self.max[0].max(p[0]), self.max[1].max(p[1])];
    }

    pub fn union(&self, o: &Rect) -> Rect {
        Rect {
            min: [self.min[0].min(o.min[0]), self.min[1].min(o.min[1])],
            max: [self.max[0].max(o.max[0]), self.max[1].max(o.max[1])],
        }
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.min[0] + self.max[0]) / 2.0, (self.min[1] + self.max[1]) / 2.0]
    }

    pub fn contains(&self, o: &Rect) -> bool {
        self.min[0] <= o.min[0] && self.min[1] <= o.min[1] && self.max[0] >= o.max[0] && self.max[1] >= o.max[1]
    }

    /// Closed-interval overlap test.
    pub fn intersects(&self, o: &Rect) -> bool {
        self.min[0] <= o.max[0] && o.min[0] <= self.max[0] && self.min[1] <= o.max[1] && o.min[1] <= self.max[1]
    }

    /// Smallest distance from `p` to the rectangle, zero inside.
    pub fn distance_to(&self, p: [f64; 2]) -> f64 {
        let dx = (self.min[0] - p[0]).max(0.0).max(p[0] - self.max[0]);
        let dy = (self.min[1] - p[1]).max(0.0).max(p[1] - self.max[1]);
        dx.hypot(dy)
    }

    pub fn diagonal(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            (self.max[0] - self.min[0]).hypot(self.max[1] - self.min[1])
        }
    }
}

fn xy(c: &Coord) -> [f64; 2] {
    [c[0], c[1]]
}

/// Distance from `p` to segment `a`-`b` in the xy-plane.
pub fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let (cx, cy) = (a[0] + t * dx, a[1] + t * dy);
    (p[0] - cx).hypot(p[1] - cy)
}

fn polyline_distance(p: [f64; 2], coords: &[Coord]) -> f64 {
    coords.windows(2).map(|w| segment_distance(p, xy(&w[0]), xy(&w[1]))).fold(f64::INFINITY, f64::min)
}

/// Even-odd containment over all rings, so holes are excluded.
fn inside_rings(p: [f64; 2], rings: &[Vec<Coord>]) -> bool {
    let mut inside = false;
    for ring in rings {
        for w in ring.windows(2) {
            let (a, b) = (w[0], w[1]);
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
    }
    inside
}

impl Geometry {
    pub fn point(coord: Coord, dim: Dim) -> Result<Self> {
        let g = Geometry::Point { dim, coord: flatten(coord, dim) };
        g.validate()?;
        Ok(g)
    }

    pub fn line_string(coords: Vec<Coord>, dim: Dim) -> Result<Self> {
        let g = Geometry::LineString { dim, coords: coords.into_iter().map(|c| flatten(c, dim)).collect() };
        g.validate()?;
        Ok(g)
    }

    /// Builds a polygon; an open ring is closed by repeating its first vertex.
    pub fn polygon(rings: Vec<Vec<Coord>>, dim: Dim) -> Result<Self> {
        let rings = rings
            .into_iter()
            .map(|r| {
                let mut r: Vec<Coord> = r.into_iter().map(|c| flatten(c, dim)).collect();
                if r.len() >= 3 && r.first() != r.last() {
                    r.push(r[0]);
                }
                r
            })
            .collect();
        let g = Geometry::Polygon { dim, rings };
        g.validate()?;
        Ok(g)
    }

    pub fn dim(&self) -> Dim {
        match self {
            Geometry::Point { dim, .. } | Geometry::LineString { dim, .. } | Geometry::Polygon { dim, .. } => *dim,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Geometry::Point { .. } => "Point",
            Geometry::LineString { .. } => "LineString",
            Geometry::Polygon { .. } => "Polygon",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidGeometry(m));
        let finite = |c: &Coord| c.iter().all(|v| v.is_finite());
        let flat = |c: &Coord| self.dim() == Dim::Xyz || c[2] == 0.0;
        match self {
            Geometry::Point { coord, .. } => {
                if !finite(coord) || !flat(coord) {
                    return bad("point coordinate not finite".into());
                }
            }
            Geometry::LineString { coords, .. } => {
                if coords.len() < 2 {
                    return bad(format!("linestring needs at least 2 vertices, got {}", coords.len()));
                }
                if !coords.iter().all(|c| finite(c) && flat(c)) {
                    return bad("linestring coordinate not finite".into());
                }
            }
            Geometry::Polygon { rings, .. } => {
                if rings.is_empty() {
                    return bad("polygon without rings".into());
                }
                for (i, r) in rings.iter().enumerate() {
                    if r.len() < 4 {
                        return bad(format!("ring {i} needs at least 4 vertices, got {}", r.len()));
                    }
                    if r.first() != r.last() {
                        return bad(format!("ring {i} is not closed"));
                    }
                    if !r.iter().all(|c| finite(c) && flat(c)) {
                        return bad(format!("ring {i} has a non-finite coordinate"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn coords(&self) -> Box<dyn Iterator<Item = &Coord> + '_> {
        match self {
            Geometry::Point { coord, .. } => Box::new(std::iter::once(coord)),
            Geometry::LineString { coords, .. } => Box::new(coords.iter()),
            Geometry::Polygon { rings, .. } => Box::new(rings.iter().flatten()),
        }
    }

    pub fn bbox(&self) -> Rect {
        let mut r = Rect::EMPTY;
        for c in self.coords() {
            r.expand_point(xy(c));
        }
        r
    }

    /// Minimum distance from `p` to the geometry in the xy-plane; zero inside polygons.
    pub fn distance_xy(&self, p: [f64; 2]) -> f64 {
        match self {
            Geometry::Point { coord, .. } => (coord[0] - p[0]).hypot(coord[1] - p[1]),
            Geometry::LineString { coords, .. } => polyline_distance(p, coords),
            Geometry::Polygon { rings, .. } => {
                if inside_rings(p, rings) {
                    0.0
                } else {
                    rings.iter().map(|r| polyline_distance(p, r)).fold(f64::INFINITY, f64::min)
                }
            }
        }
    }

    /// GeoJSON geometry object; coordinates carry z only for 3D geometries.
    pub fn to_geojson(&self) -> Value {
        let c = |c: &Coord| -> Value {
            match self.dim() {
                Dim::Xy => json!([c[0], c[1]]),
                Dim::Xyz => json!([c[0], c[1], c[2]]),
            }
        };
        match self {
            Geometry::Point { coord, .. } => json!({"type": "Point", "coordinates": c(coord)}),
            Geometry::LineString { coords, .. } => {
                json!({"type": "LineString", "coordinates": coords.iter().map(c).collect::<Vec<_>>()})
            }
            Geometry::Polygon { rings, .. } => json!({
                "type": "Polygon",
                "coordinates": rings.iter().map(|r| r.iter().map(c).collect::<Vec<_>>()).collect::<Vec<_>>()
            }),
        }
    }

    pub fn from_geojson(v: &Value) -> Result<Self> {
        let bad = |m: &str| Error::InvalidGeometry(format!("GeoJSON: {m}"));
        let kind = v.get("type").and_then(Value::as_str).ok_or_else(|| bad("missing type"))?;
        let coords = v.get("coordinates").ok_or_else(|| bad("missing coordinates"))?;
        let mut dim: Option<Dim> = None;
        let mut coord = |c: &Value| -> Result<Coord> {
            let a = c.as_array().ok_or_else(|| bad("coordinate is not an array"))?;
            let d = match a.len() {
                2 => Dim::Xy,
                3 => Dim::Xyz,
                n => return Err(bad(&format!("coordinate with {n} values"))),
            };
            if *dim.get_or_insert(d) != d {
                return Err(bad("mixed coordinate dimensions"));
            }
            let mut out = [0.0; 3];
            for (k, x) in a.iter().enumerate() {
                out[k] = x.as_f64().ok_or_else(|| bad("coordinate is not a number"))?;
            }
            Ok(out)
        };
        let list = |v: &Value| v.as_array().cloned().ok_or_else(|| bad("coordinates are not an array"));
        let g = match kind {
            "Point" => {
                let c = coord(coords)?;
                Geometry::Point { dim: Dim::Xy, coord: c }
            }
            "LineString" => {
                let cs = list(coords)?.iter().map(&mut coord).collect::<Result<Vec<_>>>()?;
                Geometry::LineString { dim: Dim::Xy, coords: cs }
            }
            "Polygon" => {
                let mut rings = Vec::new();
                for r in list(coords)? {
                    rings.push(list(&r)?.iter().map(&mut coord).collect::<Result<Vec<_>>>()?);
                }
                Geometry::Polygon { dim: Dim::Xy, rings }
            }
            other => return Err(bad(&format!("unsupported type `{other}`"))),
        };
        let dim = dim.unwrap_or(Dim::Xy);
        let g = match g {
            Geometry::Point { coord, .. } => Geometry::Point { dim, coord },
            Geometry::LineString { coords, .. } => Geometry::LineString { dim, coords },
            Geometry::Polygon { rings, .. } => Geometry::Polygon { dim, rings },
        };
        g.validate()?;
        Ok(g)
    }
}

fn flatten(c: Coord, dim: Dim) -> Coord {
    match dim {
        Dim::Xy => [c[0], c[1], 0.0],
        Dim::Xyz => c,
    }
}

impl Serialize for Geometry {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_geojson().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Geometry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = Value::deserialize(d)?;
        Geometry::from_geojson(&v).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Geometry {
        Geometry::polygon(vec![vec![[0.0, 0.0, 0.0], [4.0, 0.0, 0.0], [4.0, 4.0, 0.0], [0.0, 4.0, 0.0]]], Dim::Xy).unwrap()
    }

    #[test]
    fn polygon_distance() {
        let g = square();
        assert_eq!(g.distance_xy([2.0, 2.0]), 0.0);
        assert_eq!(g.distance_xy([7.0, 2.0]), 3.0);
        assert_eq!(g.distance_xy([7.0, 8.0]), 5.0);
    }

    #[test]
    fn hole_is_outside() {
        let outer = vec![[0.0, 0.0, 0.0], [10.0, 0.0, 0.0], [10.0, 10.0, 0.0], [0.0, 10.0, 0.0]];
        let hole = vec![[4.0, 4.0, 0.0], [6.0, 4.0, 0.0], [6.0, 6.0, 0.0], [4.0, 6.0, 0.0]];
        let g = Geometry::polygon(vec![outer, hole], Dim::Xy).unwrap();
        assert_eq!(g.distance_xy([5.0, 5.0]), 1.0);
        assert_eq!(g.distance_xy([2.0, 5.0]), 0.0);
    }

    #[test]
    fn validation() {
        assert!(Geometry::line_string(vec![[0.0; 3]], Dim::Xy).is_err());
        assert!(Geometry::point([f64::NAN, 0.0, 0.0], Dim::Xy).is_err());
        let open = Geometry::Polygon { dim: Dim::Xy, rings: vec![vec![[0.0; 3], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]]] };
        assert!(open.validate().is_err());
    }

    #[test]
    fn geojson_round_trip_keeps_z() {
        let g = Geometry::line_string(vec![[0.1, 0.2, 0.3], [1.0, -2.0, 1e-300]], Dim::Xyz).unwrap();
        assert_eq!(Geometry::from_geojson(&g.to_geojson()).unwrap(), g);
        let s = square();
        assert_eq!(Geometry::from_geojson(&s.to_geojson()).unwrap(), s);
    }

    #[test]
    fn rect_distance() {
        let r = Rect::new([0.0, 0.0], [1.0, 1.0]);
        assert_eq!(r.distance_to([0.5, 0.5]), 0.0);
        assert_eq!(r.distance_to([4.0, 5.0]), 5.0);
        assert!(r.intersects(&Rect::from_point([1.0, 1.0])));
    }
}
