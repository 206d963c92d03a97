use serde::{Deserialize, Serialize};

use super::geometry::{Coord, Geometry};
use crate::error::{Error, Result};

/// Indexed triangle mesh attached to a polygon object.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Coord>,
    pub triangles: Vec<[u32; 3]>,
}

impl TriangleMesh {
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(t) = self.triangles.iter().find(|t| t.iter().any(|&i| i as usize >= n)) {
            return Err(Error::InvalidGeometry(format!("triangle {t:?} indexes past {n} vertices")));
        }
        if !self.vertices.iter().flatten().all(|v| v.is_finite()) {
            return Err(Error::InvalidGeometry("mesh vertex not finite".into()));
        }
        Ok(())
    }

    /// Blob layout: vertex count and triangle count as u32, then vertices as
    /// 3 x f64 and triangles as 3 x u32, all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 24 * self.vertices.len() + 12 * self.triangles.len());
        out.extend_from_slice(&(self.vertices.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.triangles.len() as u32).to_le_bytes());
        for v in self.vertices.iter().flatten() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for i in self.triangles.iter().flatten() {
            out.extend_from_slice(&i.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        let bad = || Error::InvalidGeometry(format!("mesh blob of {} bytes is malformed", b.len()));
        let word = |at: usize| -> Result<u32> { Ok(u32::from_le_bytes(b.get(at..at + 4).ok_or_else(bad)?.try_into().unwrap())) };
        let (nv, nt) = (word(0)? as usize, word(4)? as usize);
        if b.len() != 8 + 24 * nv + 12 * nt {
            return Err(bad());
        }
        let f = |at: usize| f64::from_le_bytes(b[at..at + 8].try_into().unwrap());
        let vertices = (0..nv).map(|i| std::array::from_fn(|k| f(8 + 24 * i + 8 * k))).collect();
        let base = 8 + 24 * nv;
        let triangles = (0..nt)
            .map(|i| Ok(std::array::from_fn(|k| u32::from_le_bytes(b[base + 12 * i + 4 * k..][..4].try_into().unwrap()))))
            .collect::<Result<Vec<_>>>()?;
        let m = TriangleMesh { vertices, triangles };
        m.validate()?;
        Ok(m)
    }

    /// Sum of triangle areas projected on the xy-plane.
    pub fn area_xy(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| self.vertices[i as usize]);
                cross(a, b, c).abs() / 2.0
            })
            .sum()
    }
}

fn cross(a: Coord, b: Coord, c: Coord) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn in_triangle(p: Coord, a: Coord, b: Coord, c: Coord) -> bool {
    cross(a, b, p) >= 0.0 && cross(b, c, p) >= 0.0 && cross(c, a, p) >= 0.0
}

/// Ear-clipping triangulation of a polygon's exterior ring in the xy-plane.
/// Holes are not bridged; vertices keep their z.
pub fn triangulate(polygon: &Geometry) -> Result<TriangleMesh> {
    let Geometry::Polygon { rings, .. } = polygon else {
        return Err(Error::InvalidGeometry("only polygons can be triangulated".into()));
    };
    let ring = &rings[0][..rings[0].len() - 1];
    let n = ring.len();
    let signed: f64 = (0..n).map(|i| ring[i][0] * ring[(i + 1) % n][1] - ring[(i + 1) % n][0] * ring[i][1]).sum();
    let mut idx: Vec<usize> = (0..n).collect();
    if signed < 0.0 {
        idx.reverse();
    }
    let mut triangles = Vec::with_capacity(n.saturating_sub(2));
    while idx.len() > 3 {
        let m = idx.len();
        let ear = (0..m).find(|&i| {
            let (a, b, c) = (ring[idx[(i + m - 1) % m]], ring[idx[i]], ring[idx[(i + 1) % m]]);
            cross(a, b, c) > 0.0
                && idx
                    .iter()
                    .filter(|&&j| ![idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]].contains(&j))
                    .all(|&j| !in_triangle(ring[j], a, b, c) || ring[j] == a || ring[j] == b || ring[j] == c)
        });
        // Degenerate outlines (collinear runs, self-touching rings) may have no strict
        // ear; drop the flattest vertex so the loop always terminates.
        let i = ear.unwrap_or_else(|| {
            (0..m)
                .min_by(|&x, &y| {
                    let f = |i: usize| cross(ring[idx[(i + m - 1) % m]], ring[idx[i]], ring[idx[(i + 1) % m]]).abs();
                    f(x).total_cmp(&f(y))
                })
                .unwrap()
        });
        let tri = [idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]];
        if ear.is_some() {
            triangles.push(tri.map(|v| v as u32));
        }
        idx.remove(i);
    }
    if idx.len() == 3 && cross(ring[idx[0]], ring[idx[1]], ring[idx[2]]) != 0.0 {
        triangles.push([idx[0] as u32, idx[1] as u32, idx[2] as u32]);
    }
    Ok(TriangleMesh { vertices: ring.to_vec(), triangles })
}
