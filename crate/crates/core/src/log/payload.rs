//! Codec-tagged sensor payloads, stored inline or as relative paths.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Component, Path, PathBuf};
use std::str::FromStr;

use flate2::read::ZlibDecoder;
use flate2::write::ZlibEncoder;
use flate2::Compression;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, IoContext, Result};

/// Bytes per decoded lidar point: x, y, z, intensity as little-endian f32.
pub const POINT_RECORD_BYTES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Codec {
    RawF32Le,
    RawDeflate,
    Png,
    Jpeg,
    Mp4,
    Draco,
    Laz,
    /// Unrecognized tag; bytes are carried through untouched.
    Other(String),
}

impl Codec {
    pub fn as_str(&self) -> &str {
        match self {
            Codec::RawF32Le => "raw_f32le",
            Codec::RawDeflate => "raw_deflate",
            Codec::Png => "png",
            Codec::Jpeg => "jpeg",
            Codec::Mp4 => "mp4",
            Codec::Draco => "draco",
            Codec::Laz => "laz",
            Codec::Other(s) => s,
        }
    }

    pub fn decodes_to_points(&self) -> bool {
        matches!(self, Codec::RawF32Le | Codec::RawDeflate)
    }
}

impl FromStr for Codec {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "raw_f32le" => Codec::RawF32Le,
            "raw_deflate" => Codec::RawDeflate,
            "png" => Codec::Png,
            "jpeg" => Codec::Jpeg,
            "mp4" => Codec::Mp4,
            "draco" => Codec::Draco,
            "laz" => Codec::Laz,
            other => Codec::Other(other.to_string()),
        })
    }
}

impl fmt::Display for Codec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for Codec {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Codec {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PayloadLocation {
    Inline(Vec<u8>),
    /// Path relative to the log directory (or the source root before conversion).
    External(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PayloadRef {
    pub location: PayloadLocation,
    pub codec: Codec,
}

/// Checks that `path` is relative and never climbs out of its base directory.
pub fn check_relative_path(path: &Path) -> Result<()> {
    let ok = !path.as_os_str().is_empty() && path.components().all(|c| matches!(c, Component::Normal(_)));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidPayloadPath(path.display().to_string()))
    }
}

impl PayloadRef {
    pub fn inline(bytes: Vec<u8>, codec: Codec) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::PayloadCorrupt("inline payload is empty".into()));
        }
        Ok(PayloadRef { location: PayloadLocation::Inline(bytes), codec })
    }

    pub fn external(path: impl Into<PathBuf>, codec: Codec) -> Result<Self> {
        let path = path.into();
        check_relative_path(&path)?;
        Ok(PayloadRef { location: PayloadLocation::External(path), codec })
    }

    pub fn validate(&self) -> Result<()> {
        match &self.location {
            PayloadLocation::Inline(b) if b.is_empty() => Err(Error::PayloadCorrupt("inline payload is empty".into())),
            PayloadLocation::Inline(_) => Ok(()),
            PayloadLocation::External(p) => check_relative_path(p),
        }
    }

    pub fn is_inline(&self) -> bool {
        matches!(self.location, PayloadLocation::Inline(_))
    }

    /// The encoded bytes, reading external payloads relative to `base_dir`.
    pub fn bytes(&self, base_dir: &Path) -> Result<Vec<u8>> {
        match &self.location {
            PayloadLocation::Inline(b) => Ok(b.clone()),
            PayloadLocation::External(rel) => {
                check_relative_path(rel)?;
                let path = base_dir.join(rel);
                match std::fs::read(&path) {
                    Ok(b) => Ok(b),
                    Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingPayload(path)),
                    Err(e) => Err(Error::io(path, e)),
                }
            }
        }
    }
}

/// Lidar points in the sensor-reference body frame: x, y, z in meters, intensity in [0, 1].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<[f32; 4]>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn to_raw_f32le(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.points.len() * POINT_RECORD_BYTES);
        for p in &self.points {
            for v in p {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_raw_f32le(bytes: &[u8]) -> Result<Self> {
        if bytes.len() % POINT_RECORD_BYTES != 0 {
            return Err(Error::PayloadCorrupt(format!(
                "{} bytes is not a multiple of the {POINT_RECORD_BYTES}-byte point record",
                bytes.len()
            )));
        }
        let points = bytes
            .chunks_exact(POINT_RECORD_BYTES)
            .map(|c| {
                let f = |i: usize| f32::from_le_bytes(c[i * 4..i * 4 + 4].try_into().unwrap());
                [f(0), f(1), f(2), f(3)]
            })
            .collect();
        Ok(PointCloud { points })
    }

    pub fn to_raw_deflate(&self) -> Vec<u8> {
        let mut enc = ZlibEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&self.to_raw_f32le()).expect("in-memory write");
        enc.finish().expect("in-memory write")
    }

    /// ASCII PLY with `x y z intensity` vertex properties, one point per line.
    pub fn write_ply(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "ply\nformat ascii 1.0\nelement vertex {}", self.points.len())?;
        writeln!(out, "property float x\nproperty float y\nproperty float z\nproperty float intensity\nend_header")?;
        for [x, y, z, i] in &self.points {
            writeln!(out, "{x} {y} {z} {i}")?;
        }
        Ok(())
    }

    /// Encodes with a point codec; other codecs are rejected.
    pub fn encode(&self, codec: &Codec) -> Result<Vec<u8>> {
        match codec {
            Codec::RawF32Le => Ok(self.to_raw_f32le()),
            Codec::RawDeflate => Ok(self.to_raw_deflate()),
            other => Err(Error::CodecUnsupportedForDecode(other.to_string())),
        }
    }
}

/// Decoded payload: points for raw codecs, encoded bytes for image/video/compressed-cloud codecs.
#[derive(Debug, Clone, PartialEq)]
pub enum DecodedPayload {
    Points(PointCloud),
    Encoded { codec: Codec, bytes: Vec<u8> },
}

pub fn decode_points_from_bytes(bytes: &[u8], codec: &Codec) -> Result<PointCloud> {
    match codec {
        Codec::RawF32Le => PointCloud::from_raw_f32le(bytes),
        Codec::RawDeflate => {
            let mut raw = Vec::new();
            ZlibDecoder::new(bytes)
                .read_to_end(&mut raw)
                .map_err(|e| Error::PayloadCorrupt(format!("deflate stream: {e}")))?;
            PointCloud::from_raw_f32le(&raw)
        }
        other => Err(Error::CodecUnsupportedForDecode(other.to_string())),
    }
}

/// Decodes a lidar payload into points, independent of where it is stored.
pub fn decode_points(p: &PayloadRef, base_dir: &Path) -> Result<PointCloud> {
    if !p.codec.decodes_to_points() {
        return Err(Error::CodecUnsupportedForDecode(p.codec.to_string()));
    }
    decode_points_from_bytes(&p.bytes(base_dir)?, &p.codec)
}

pub fn decode_payload(p: &PayloadRef, base_dir: &Path) -> Result<DecodedPayload> {
    let bytes = p.bytes(base_dir)?;
    if p.codec.decodes_to_points() {
        Ok(DecodedPayload::Points(decode_points_from_bytes(&bytes, &p.codec)?))
    } else {
        Ok(DecodedPayload::Encoded { codec: p.codec.clone(), bytes })
    }
}

pub fn export_ply(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).at(path)?);
    cloud.write_ply(&mut out).at(path)?;
    out.flush().at(path)
}

pub(crate) fn write_blob(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).at(parent)?;
    }
    std::fs::write(path, bytes).at(path)
}
