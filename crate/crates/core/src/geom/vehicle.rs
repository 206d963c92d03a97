use serde::{Deserialize, Serialize};

use super::se3::{add3, Se3};
use crate::error::{Error, Result};

/// Rear overhang assumed by [`VehicleParameters::with_inferred_center`].
pub const DEFAULT_REAR_OVERHANG_M: f64 = 1.0;

/// Where the recorded ego pose sits on the vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseOrigin {
    RearAxle,
    Center,
    /// Ground projection of the vehicle center.
    GroundPlane,
    Imu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferencePoint {
    RearAxle,
    Center,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleParameters {
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub wheelbase: f64,
    /// Longitudinal offset from the rear axle to the geometric center, forward positive.
    pub rear_axle_to_center: f64,
    pub pose_origin: PoseOrigin,
    /// Longitudinal IMU position relative to the rear axle; required when `pose_origin` is `imu`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub imu_to_rear_axle: Option<f64>,
}

impl VehicleParameters {
    pub fn new(
        length: f64,
        width: f64,
        height: f64,
        wheelbase: f64,
        rear_axle_to_center: f64,
        pose_origin: PoseOrigin,
    ) -> Result<Self> {
        let v = VehicleParameters {
            length,
            width,
            height,
            wheelbase,
            rear_axle_to_center,
            pose_origin,
            imu_to_rear_axle: None,
        };
        v.validate()?;
        Ok(v)
    }

    /// Fills `rear_axle_to_center` as `length / 2 - DEFAULT_REAR_OVERHANG_M` for sources
    /// that only publish the vehicle extent.
    pub fn with_inferred_center(length: f64, width: f64, height: f64, wheelbase: f64, origin: PoseOrigin) -> Result<Self> {
        Self::new(length, width, height, wheelbase, length / 2.0 - DEFAULT_REAR_OVERHANG_M, origin)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("length", self.length),
            ("width", self.width),
            ("height", self.height),
            ("wheelbase", self.wheelbase),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidVehicle(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.rear_axle_to_center.is_finite() && self.rear_axle_to_center < self.length) {
            return Err(Error::InvalidVehicle(format!(
                "rear_axle_to_center {} must be below length {}",
                self.rear_axle_to_center, self.length
            )));
        }
        Ok(())
    }

    /// Longitudinal position of the pose origin relative to the rear axle.
    pub fn origin_offset(&self) -> Result<f64> {
        match self.pose_origin {
            PoseOrigin::RearAxle => Ok(0.0),
            PoseOrigin::Center | PoseOrigin::GroundPlane => Ok(self.rear_axle_to_center),
            PoseOrigin::Imu => self.imu_to_rear_axle.ok_or_else(|| Error::UnknownOrigin("imu".into())),
        }
    }

    fn target_offset(&self, target: ReferencePoint) -> f64 {
        match target {
            ReferencePoint::RearAxle => 0.0,
            ReferencePoint::Center => self.rear_axle_to_center,
        }
    }
}

/// Moves a recorded pose to the requested vehicle reference point.
///
/// The shift is along the body x-axis; rotation is unchanged.
pub fn pose_at_reference(state_pose: &Se3, params: &VehicleParameters, target: ReferencePoint) -> Result<Se3> {
    let shift = params.target_offset(target) - params.origin_offset()?;
    if shift == 0.0 {
        return Ok(*state_pose);
    }
    let offset = state_pose.rotation.rotate([shift, 0.0, 0.0]);
    Ok(Se3::new(add3(state_pose.translation, offset), state_pose.rotation))
}
