//! Time, rigid transforms, camera projection and vehicle reference points.

mod camera;
mod se3;
mod time;
mod vehicle;

pub use camera::{looking_camera_extrinsic, optical_to_body_rotation, CameraModel, Projection, ProjectionModel, MIN_DEPTH};
pub use se3::{add3, cross3, norm3, scale3, sub3, Quaternion, Se3, Vec3, QUATERNION_NORM_TOLERANCE};
pub use time::{TimeDelta, TimePoint};
pub use vehicle::{pose_at_reference, PoseOrigin, ReferencePoint, VehicleParameters, DEFAULT_REAR_OVERHANG_M};
