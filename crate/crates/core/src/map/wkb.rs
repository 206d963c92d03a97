//! ISO Well-Known Binary for points, linestrings and polygons.
//!
//! Writing is little-endian; reading accepts either byte order. Z variants use
//! the ISO type codes (base + 1000).

use super::geometry::{Coord, Dim, Geometry};
use crate::error::{Error, Result};

const POINT: u32 = 1;
const LINESTRING: u32 = 2;
const POLYGON: u32 = 3;
const Z_OFFSET: u32 = 1000;

pub fn wkb_encode(g: &Geometry) -> Vec<u8> {
    let dim = g.dim();
    let base = match g {
        Geometry::Point { .. } => POINT,
        Geometry::LineString { .. } => LINESTRING,
        Geometry::Polygon { .. } => POLYGON,
    };
    let code = if dim == Dim::Xyz { base + Z_OFFSET } else { base };
    let mut out = Vec::with_capacity(5 + 8 * dim.size() * g.coords().count() + 16);
    out.push(1u8);
    out.extend_from_slice(&code.to_le_bytes());
    let put = |out: &mut Vec<u8>, c: &Coord| {
        for v in &c[..dim.size()] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    };
    match g {
        Geometry::Point { coord, .. } => put(&mut out, coord),
        Geometry::LineString { coords, .. } => {
            out.extend_from_slice(&(coords.len() as u32).to_le_bytes());
            coords.iter().for_each(|c| put(&mut out, c));
        }
        Geometry::Polygon { rings, .. } => {
            out.extend_from_slice(&(rings.len() as u32).to_le_bytes());
            for r in rings {
                out.extend_from_slice(&(r.len() as u32).to_le_bytes());
                r.iter().for_each(|c| put(&mut out, c));
            }
        }
    }
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
    little: bool,
}

impl Cursor<'_> {
    fn take<const N: usize>(&mut self, what: &str) -> Result<[u8; N]> {
        let end = self.pos + N;
        let bytes = self.buf.get(self.pos..end).ok_or_else(|| {
            Error::MalformedWkb(format!("truncated while reading {what} at byte {} of {}", self.pos, self.buf.len()))
        })?;
        self.pos = end;
        Ok(bytes.try_into().unwrap())
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take::<4>(what)?;
        Ok(if self.little { u32::from_le_bytes(b) } else { u32::from_be_bytes(b) })
    }

    fn f64(&mut self) -> Result<f64> {
        let b = self.take::<8>("coordinate")?;
        Ok(if self.little { f64::from_le_bytes(b) } else { f64::from_be_bytes(b) })
    }

    fn coord(&mut self, dim: Dim) -> Result<Coord> {
        let mut c = [0.0; 3];
        for v in c.iter_mut().take(dim.size()) {
            *v = self.f64()?;
        }
        Ok(c)
    }

    /// Reads a count and checks that the remaining bytes can hold that many items.
    fn count(&mut self, item_bytes: usize, what: &str) -> Result<usize> {
        let n = self.u32(what)? as usize;
        if n.saturating_mul(item_bytes) > self.buf.len() - self.pos {
            return Err(Error::MalformedWkb(format!("{what} {n} exceeds the remaining {} bytes", self.buf.len() - self.pos)));
        }
        Ok(n)
    }
}

pub fn wkb_decode(buf: &[u8]) -> Result<Geometry> {
    let order = *buf.first().ok_or_else(|| Error::MalformedWkb("empty buffer".into()))?;
    let little = match order {
        0 => false,
        1 => true,
        b => return Err(Error::MalformedWkb(format!("bad byte-order marker {b}"))),
    };
    let mut cur = Cursor { buf, pos: 1, little };
    let code = cur.u32("type code")?;
    let (base, dim) = match code {
        1..=3 => (code, Dim::Xy),
        1001..=1003 => (code - Z_OFFSET, Dim::Xyz),
        other => return Err(Error::MalformedWkb(format!("unsupported geometry type code {other}"))),
    };
    let coord_bytes = 8 * dim.size();
    let g = match base {
        POINT => Geometry::Point { dim, coord: cur.coord(dim)? },
        LINESTRING => {
            let n = cur.count(coord_bytes, "point count")?;
            let coords = (0..n).map(|_| cur.coord(dim)).collect::<Result<Vec<_>>>()?;
            Geometry::LineString { dim, coords }
        }
        _ => {
            let nr = cur.count(4, "ring count")?;
            let mut rings = Vec::with_capacity(nr);
            for _ in 0..nr {
                let n = cur.count(coord_bytes, "point count")?;
                rings.push((0..n).map(|_| cur.coord(dim)).collect::<Result<Vec<_>>>()?);
            }
            Geometry::Polygon { dim, rings }
        }
    };
    if cur.pos != buf.len() {
        return Err(Error::MalformedWkb(format!("{} trailing bytes", buf.len() - cur.pos)));
    }
    g.validate().map_err(|e| match e {
        Error::InvalidGeometry(m) => Error::MalformedWkb(m),
        other => other,
    })?;
    Ok(g)
}
