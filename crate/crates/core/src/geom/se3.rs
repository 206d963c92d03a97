use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

/// Norm deviation beyond which a stored quaternion is treated as corrupt.
pub const QUATERNION_NORM_TOLERANCE: f64 = 1e-3;

/// Unit quaternion stored as (w, x, y, z). Serializes as a `[w, x, y, z]` array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct Quaternion {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quaternion {
    pub const IDENTITY: Quaternion = Quaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    /// Validates and normalizes `(w, x, y, z)`.
    ///
    /// Inputs whose norm is off by more than 1e-3 are rejected. Inputs already
    /// unit to within 1e-12 are kept bit-for-bit so stored poses read back unchanged.
    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (w * w + x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > QUATERNION_NORM_TOLERANCE {
            return Err(Error::CorruptQuaternion { norm });
        }
        if (norm - 1.0).abs() <= 1e-12 {
            return Ok(Quaternion { w, x, y, z });
        }
        Ok(Quaternion { w: w / norm, x: x / norm, y: y / norm, z: z / norm })
    }

    pub fn from_wxyz(q: [f64; 4]) -> Result<Self> {
        Self::new(q[0], q[1], q[2], q[3])
    }

    pub fn wxyz(&self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let n = norm3(axis);
        let (s, c) = (angle * 0.5).sin_cos();
        let k = s / n;
        Quaternion { w: c, x: axis[0] * k, y: axis[1] * k, z: axis[2] * k }.normalized()
    }

    pub fn from_yaw(yaw: f64) -> Self {
        let (s, c) = (yaw * 0.5).sin_cos();
        Quaternion { w: c, x: 0.0, y: 0.0, z: s }
    }

    /// Rotation from roll, pitch, yaw (intrinsic z-y'-x'').
    pub fn from_euler(roll: f64, pitch: f64, yaw: f64) -> Self {
        let (sr, cr) = (roll * 0.5).sin_cos();
        let (sp, cp) = (pitch * 0.5).sin_cos();
        let (sy, cy) = (yaw * 0.5).sin_cos();
        Quaternion {
            w: cr * cp * cy + sr * sp * sy,
            x: sr * cp * cy - cr * sp * sy,
            y: cr * sp * cy + sr * cp * sy,
            z: cr * cp * sy - sr * sp * cy,
        }
    }

    /// Builds the rotation whose matrix is `m` (row-major, assumed orthonormal).
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Self {
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quaternion {
                w: 0.25 * s,
                x: (m[2][1] - m[1][2]) / s,
                y: (m[0][2] - m[2][0]) / s,
                z: (m[1][0] - m[0][1]) / s,
            }
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quaternion {
                w: (m[2][1] - m[1][2]) / s,
                x: 0.25 * s,
                y: (m[0][1] + m[1][0]) / s,
                z: (m[0][2] + m[2][0]) / s,
            }
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quaternion {
                w: (m[0][2] - m[2][0]) / s,
                x: (m[0][1] + m[1][0]) / s,
                y: 0.25 * s,
                z: (m[1][2] + m[2][1]) / s,
            }
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quaternion {
                w: (m[1][0] - m[0][1]) / s,
                x: (m[0][2] + m[2][0]) / s,
                y: (m[1][2] + m[2][1]) / s,
                z: 0.25 * s,
            }
        };
        q.normalized()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Quaternion { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn conjugate(&self) -> Self {
        Quaternion { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    /// Hamilton product `self * rhs`.
    pub fn mul(&self, rhs: &Quaternion) -> Quaternion {
        let (a, b) = (self, rhs);
        Quaternion {
            w: a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
            x: a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
            y: a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
            z: a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
        }
    }

    pub fn rotate(&self, v: Vec3) -> Vec3 {
        // v' = v + 2w(u x v) + 2 u x (u x v)
        let u = [self.x, self.y, self.z];
        let t = scale3(cross3(u, v), 2.0);
        let c = cross3(u, t);
        [
            v[0] + self.w * t[0] + c[0],
            v[1] + self.w * t[1] + c[1],
            v[2] + self.w * t[2] + c[2],
        ]
    }

    /// Row-major rotation matrix.
    pub fn to_matrix(&self) -> [[f64; 3]; 3] {
        let Quaternion { w, x, y, z } = *self;
        [
            [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
            [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
            [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
        ]
    }

    /// Heading of the rotated x-axis in the xy-plane.
    pub fn yaw(&self) -> f64 {
        let Quaternion { w, x, y, z } = *self;
        (2.0 * (w * z + x * y)).atan2(1.0 - 2.0 * (y * y + z * z))
    }

    /// Angle of the relative rotation between `self` and `other`, in [0, pi].
    pub fn angle_to(&self, other: &Quaternion) -> f64 {
        let d = self.conjugate().mul(other);
        let v = (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
        2.0 * v.atan2(d.w.abs())
    }

    /// Spherical linear interpolation along the shorter arc.
    pub fn slerp(&self, other: &Quaternion, t: f64) -> Quaternion {
        let mut b = *other;
        let mut dot = self.w * b.w + self.x * b.x + self.y * b.y + self.z * b.z;
        if dot < 0.0 {
            b = Quaternion { w: -b.w, x: -b.x, y: -b.y, z: -b.z };
            dot = -dot;
        }
        if dot > 1.0 - 1e-12 {
            let lerp = Quaternion {
                w: self.w + (b.w - self.w) * t,
                x: self.x + (b.x - self.x) * t,
                y: self.y + (b.y - self.y) * t,
                z: self.z + (b.z - self.z) * t,
            };
            return lerp.normalized();
        }
        let theta = dot.clamp(-1.0, 1.0).acos();
        let sin = theta.sin();
        let ka = ((1.0 - t) * theta).sin() / sin;
        let kb = (t * theta).sin() / sin;
        Quaternion {
            w: ka * self.w + kb * b.w,
            x: ka * self.x + kb * b.x,
            y: ka * self.y + kb * b.y,
            z: ka * self.z + kb * b.z,
        }
        .normalized()
    }
}

impl TryFrom<[f64; 4]> for Quaternion {
    type Error = Error;
    fn try_from(q: [f64; 4]) -> Result<Self> {
        Quaternion::from_wxyz(q)
    }
}

impl From<Quaternion> for [f64; 4] {
    fn from(q: Quaternion) -> Self {
        q.wxyz()
    }
}

/// Rigid transform: rotation followed by translation, `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Se3 {
    pub translation: Vec3,
    pub rotation: Quaternion,
}

impl Default for Se3 {
    fn default() -> Self {
        Se3::IDENTITY
    }
}

impl Se3 {
    pub const IDENTITY: Se3 = Se3 { translation: [0.0; 3], rotation: Quaternion::IDENTITY };

    pub fn new(translation: Vec3, rotation: Quaternion) -> Self {
        Se3 { translation, rotation }
    }

    /// From the 7-value storage layout `(tx, ty, tz, qw, qx, qy, qz)`.
    pub fn from_array(v: [f64; 7]) -> Result<Self> {
        Ok(Se3 {
            translation: [v[0], v[1], v[2]],
            rotation: Quaternion::new(v[3], v[4], v[5], v[6])?,
        })
    }

    pub fn to_array(&self) -> [f64; 7] {
        let t = self.translation;
        let q = self.rotation;
        [t[0], t[1], t[2], q.w, q.x, q.y, q.z]
    }

    pub fn from_translation(t: Vec3) -> Self {
        Se3 { translation: t, rotation: Quaternion::IDENTITY }
    }

    pub fn from_rotation(q: Quaternion) -> Self {
        Se3 { translation: [0.0; 3], rotation: q }
    }

    pub fn from_xy_yaw(x: f64, y: f64, yaw: f64) -> Self {
        Se3 { translation: [x, y, 0.0], rotation: Quaternion::from_yaw(yaw) }
    }

    pub fn rot_z(angle: f64) -> Self {
        Se3::from_rotation(Quaternion::from_yaw(angle))
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Se3) -> Se3 {
        let t = self.rotation.rotate(other.translation);
        Se3 {
            translation: add3(t, self.translation),
            rotation: self.rotation.mul(&other.rotation).normalized(),
        }
    }

    pub fn inverse(&self) -> Se3 {
        let r = self.rotation.conjugate();
        let t = r.rotate(self.translation);
        Se3 { translation: [-t[0], -t[1], -t[2]], rotation: r }
    }

    pub fn transform_point(&self, p: Vec3) -> Vec3 {
        add3(self.rotation.rotate(p), self.translation)
    }

    pub fn transform_points(&self, points: &[Vec3]) -> Vec<Vec3> {
        let m = self.rotation.to_matrix();
        let t = self.translation;
        points
            .iter()
            .map(|p| {
                [
                    m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2] + t[0],
                    m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2] + t[1],
                    m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2] + t[2],
                ]
            })
            .collect()
    }

    pub fn yaw(&self) -> f64 {
        self.rotation.yaw()
    }

    /// Translation distance and rotation angle between two poses.
    pub fn distance_to(&self, other: &Se3) -> (f64, f64) {
        let d = sub3(self.translation, other.translation);
        (norm3(d), self.rotation.angle_to(&other.rotation))
    }

    pub fn approx_eq(&self, other: &Se3, tol: f64) -> bool {
        let (dt, da) = self.distance_to(other);
        dt <= tol && da <= tol
    }
}

pub fn add3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub3(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale3(a: Vec3, k: f64) -> Vec3 {
    [a[0] * k, a[1] * k, a[2] * k]
}

pub fn cross3(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm3(a: Vec3) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_2, PI};

    use super::*;

    #[test]
    fn rejects_corrupt_quaternions() {
        assert!(Quaternion::new(1.0, 0.0, 0.0, 0.0).is_ok());
        assert!(Quaternion::new(1.0005, 0.0, 0.0, 0.0).is_ok());
        assert!(matches!(Quaternion::new(1.01, 0.0, 0.0, 0.0), Err(Error::CorruptQuaternion { .. })));
        assert!(Quaternion::new(f64::NAN, 0.0, 0.0, 0.0).is_err());
        let q = Quaternion::new(1.0005, 0.0, 0.0, 0.0).unwrap();
        assert!((q.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_composition() {
        let i = Se3::IDENTITY.compose(&Se3::IDENTITY);
        assert_eq!(i, Se3::IDENTITY);
    }

    #[test]
    fn compose_with_inverse_is_identity() {
        let a = Se3::new([3.0, -2.0, 0.5], Quaternion::from_euler(0.1, -0.3, 2.0));
        let i = a.compose(&a.inverse());
        assert!(i.approx_eq(&Se3::IDENTITY, 1e-9));
        let i = a.inverse().compose(&a);
        assert!(i.approx_eq(&Se3::IDENTITY, 1e-9));
    }

    #[test]
    fn rotate_half_turn() {
        let p = Se3::rot_z(PI).transform_points(&[[1.0, 0.0, 0.0]])[0];
        assert!((p[0] + 1.0).abs() < 1e-15 && p[1].abs() < 1e-15 && p[2] == 0.0);
        let p = Se3::IDENTITY.transform_points(&[[3.0, 4.0, 5.0]]);
        assert_eq!(p, vec![[3.0, 4.0, 5.0]]);
    }

    #[test]
    fn yaw_and_matrix_round_trip() {
        let q = Quaternion::from_euler(0.2, -0.4, 1.1);
        let back = Quaternion::from_matrix(&q.to_matrix());
        assert!(q.angle_to(&back) < 1e-12);
        assert!((Quaternion::from_yaw(FRAC_PI_2).yaw() - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn slerp_endpoints_and_midpoint() {
        let a = Quaternion::from_yaw(0.0);
        let b = Quaternion::from_yaw(1.0);
        assert!(a.slerp(&b, 0.0).angle_to(&a) < 1e-12);
        assert!(a.slerp(&b, 1.0).angle_to(&b) < 1e-12);
        assert!((a.slerp(&b, 0.5).yaw() - 0.5).abs() < 1e-12);
    }
}
