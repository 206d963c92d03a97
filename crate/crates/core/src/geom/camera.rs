//! Camera intrinsics and the body-to-camera axis convention.
//!
//! Camera frames follow the optical convention: x right, y down, z forward.
//! Body frames follow ISO 8855: x forward, y left, z up.

use serde::{Deserialize, Serialize};

use super::se3::{Quaternion, Se3, Vec3};
use crate::error::{Error, Result};

/// Points closer than this to the image plane are reported invalid.
pub const MIN_DEPTH: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionModel {
    Pinhole,
    PinholeBrownConrady,
    FisheyeEquidistant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub model: ProjectionModel,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    /// `(k1, k2, p1, p2, k3)` for Brown-Conrady, `(k1..k4)` for fisheye, empty or five zeros for pinhole.
    #[serde(default)]
    pub distortion: Vec<f64>,
    pub width: u32,
    pub height: u32,
    /// Camera pose in the body frame.
    pub extrinsic: Se3,
}

/// Rotation taking optical-frame vectors into a forward-looking body frame.
pub fn optical_to_body_rotation() -> Quaternion {
    // columns: camera x -> body -y, camera y -> body -z, camera z -> body +x
    Quaternion::from_matrix(&[[0.0, 0.0, 1.0], [-1.0, 0.0, 0.0], [0.0, -1.0, 0.0]])
}

/// Extrinsic of a camera at `position` (body frame) looking along body yaw `yaw`.
pub fn looking_camera_extrinsic(position: Vec3, yaw: f64) -> Se3 {
    Se3::new(position, Quaternion::from_yaw(yaw).mul(&optical_to_body_rotation()).normalized())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Pixel coordinates; NaN where `valid` is false.
    pub pixels: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
}

impl CameraModel {
    pub fn new(
        model: ProjectionModel,
        [fx, fy, cx, cy]: [f64; 4],
        distortion: Vec<f64>,
        width: u32,
        height: u32,
        extrinsic: Se3,
    ) -> Result<Self> {
        let cam = CameraModel { model, fx, fy, cx, cy, distortion, width, height, extrinsic };
        cam.validate()?;
        Ok(cam)
    }

    pub fn pinhole(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32, extrinsic: Se3) -> Self {
        CameraModel {
            model: ProjectionModel::Pinhole,
            fx,
            fy,
            cx,
            cy,
            distortion: Vec::new(),
            width,
            height,
            extrinsic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidCamera(format!("focal lengths must be positive, got {} {}", self.fx, self.fy)));
        }
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidCamera("image size must be positive".into()));
        }
        let ok = match self.model {
            ProjectionModel::Pinhole => {
                self.distortion.is_empty() || (self.distortion.len() == 5 && self.distortion.iter().all(|&k| k == 0.0))
            }
            ProjectionModel::PinholeBrownConrady => self.distortion.len() == 5,
            ProjectionModel::FisheyeEquidistant => self.distortion.len() == 4,
        };
        if !ok {
            return Err(Error::InvalidCamera(format!(
                "{:?} does not accept {} distortion coefficients",
                self.model,
                self.distortion.len()
            )));
        }
        Ok(())
    }

    fn coeff(&self, i: usize) -> f64 {
        self.distortion.get(i).copied().unwrap_or(0.0)
    }

    /// Expresses a body-frame point in this camera's optical frame.
    pub fn body_point_in_camera(&self, point_body: Vec3) -> Vec3 {
        self.extrinsic.inverse().transform_point(point_body)
    }

    pub fn project(&self, points_camera: &[Vec3]) -> Projection {
        let mut pixels = Vec::with_capacity(points_camera.len());
        let mut valid = Vec::with_capacity(points_camera.len());
        for p in points_camera {
            match self.project_point(*p) {
                Some(px) => {
                    pixels.push(px);
                    valid.push(true);
                }
                None => {
                    pixels.push([f64::NAN, f64::NAN]);
                    valid.push(false);
                }
            }
        }
        Projection { pixels, valid }
    }

    pub fn project_point(&self, p: Vec3) -> Option<[f64; 2]> {
        if !(p[2] > MIN_DEPTH) {
            return None;
        }
        let a = p[0] / p[2];
        let b = p[1] / p[2];
        let (xd, yd) = match self.model {
            ProjectionModel::Pinhole => (a, b),
            ProjectionModel::PinholeBrownConrady => self.brown_conrady(a, b),
            ProjectionModel::FisheyeEquidistant => self.equidistant(a, b),
        };
        Some([self.fx * xd + self.cx, self.fy * yd + self.cy])
    }

    fn brown_conrady(&self, x: f64, y: f64) -> (f64, f64) {
        let (k1, k2, p1, p2, k3) = (self.coeff(0), self.coeff(1), self.coeff(2), self.coeff(3), self.coeff(4));
        let r2 = x * x + y * y;
        let radial = 1.0 + k1 * r2 + k2 * r2 * r2 + k3 * r2 * r2 * r2;
        let xd = x * radial + 2.0 * p1 * x * y + p2 * (r2 + 2.0 * x * x);
        let yd = y * radial + p1 * (r2 + 2.0 * y * y) + 2.0 * p2 * x * y;
        (xd, yd)
    }

    fn equidistant(&self, x: f64, y: f64) -> (f64, f64) {
        let r = (x * x + y * y).sqrt();
        if r == 0.0 {
            return (x, y);
        }
        let theta = r.atan();
        let t2 = theta * theta;
        let theta_d = theta
            * (1.0 + self.coeff(0) * t2 + self.coeff(1) * t2 * t2 + self.coeff(2) * t2.powi(3) + self.coeff(3) * t2.powi(4));
        let s = theta_d / r;
        (x * s, y * s)
    }

    /// Back-projects a pixel to the camera-frame point at depth `z`.
    ///
    /// Distorted models are inverted iteratively; the result matches
    /// [`project_point`](Self::project_point) to well below a pixel inside the image.
    pub fn unproject(&self, pixel: [f64; 2], depth: f64) -> Vec3 {
        let xd = (pixel[0] - self.cx) / self.fx;
        let yd = (pixel[1] - self.cy) / self.fy;
        let (x, y) = match self.model {
            ProjectionModel::Pinhole => (xd, yd),
            ProjectionModel::PinholeBrownConrady => {
                let (mut x, mut y) = (xd, yd);
                for _ in 0..50 {
                    let (fx, fy) = self.brown_conrady(x, y);
                    x -= fx - xd;
                    y -= fy - yd;
                }
                (x, y)
            }
            ProjectionModel::FisheyeEquidistant => {
                let rd = (xd * xd + yd * yd).sqrt();
                if rd == 0.0 {
                    (xd, yd)
                } else {
                    // Newton on theta_d(theta) = rd
                    let mut theta = rd;
                    for _ in 0..30 {
                        let t2 = theta * theta;
                        let (k1, k2, k3, k4) = (self.coeff(0), self.coeff(1), self.coeff(2), self.coeff(3));
                        let f = theta * (1.0 + k1 * t2 + k2 * t2 * t2 + k3 * t2.powi(3) + k4 * t2.powi(4)) - rd;
                        let df = 1.0 + 3.0 * k1 * t2 + 5.0 * k2 * t2 * t2 + 7.0 * k3 * t2.powi(3) + 9.0 * k4 * t2.powi(4);
                        theta -= f / df;
                    }
                    let r = theta.tan();
                    (xd * r / rd, yd * r / rd)
                }
            }
        };
        [x * depth, y * depth, depth]
    }

    pub fn in_image(&self, pixel: [f64; 2]) -> bool {
        pixel[0] >= 0.0 && pixel[1] >= 0.0 && pixel[0] < self.width as f64 && pixel[1] < self.height as f64
    }
}
