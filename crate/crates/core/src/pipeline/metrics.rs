//! Calibration error metrics.

use serde::{Deserialize, Serialize};

use crate::geometry::{transform_to_euler, RigidTransform};

/// Per-axis calibration errors of an estimate against ground truth.
///
/// The relative transform `E = H_gt^-1 * H_hat` is decomposed; rotation
/// errors are the absolute Euler components in degrees, translation errors
/// the absolute translation components in meters. `rot_angle_deg` is the
/// geodesic rotation magnitude of `E`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    /// |yaw|, |pitch|, |roll| of the relative transform, degrees.
    pub rot_err_deg: [f64; 3],
    /// |tx|, |ty|, |tz| of the relative transform, meters.
    pub trans_err_m: [f64; 3],
    /// Mean of the three rotation components, degrees.
    pub mean_angle_err_deg: f64,
    /// Mean of the three translation components, meters.
    pub mean_trans_err_m: f64,
    /// Geodesic rotation magnitude, degrees.
    pub rot_angle_deg: f64,
}

/// Compares an estimated calibration against ground truth.
pub fn evaluate(h_hat: &RigidTransform, h_gt: &RigidTransform) -> MetricRecord {
    let e = h_gt.inverse().compose(h_hat);
    let euler = transform_to_euler(&e);
    let rot_err_deg = [
        euler.yaw.abs().to_degrees(),
        euler.pitch.abs().to_degrees(),
        euler.roll.abs().to_degrees(),
    ];
    let trans_err_m = [
        euler.translation[0].abs(),
        euler.translation[1].abs(),
        euler.translation[2].abs(),
    ];
    // Geodesic angle from the quaternion: theta = 2 atan2(|v|, |w|).
    let q = crate::geometry::QuatPose::from_transform(&e).quaternion;
    let vec_norm = (q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let rot_angle_deg = (2.0 * vec_norm.atan2(q[0].abs())).to_degrees();
    MetricRecord {
        rot_err_deg,
        trans_err_m,
        mean_angle_err_deg: rot_err_deg.iter().sum::<f64>() / 3.0,
        mean_trans_err_m: trans_err_m.iter().sum::<f64>() / 3.0,
        rot_angle_deg,
    }
}
