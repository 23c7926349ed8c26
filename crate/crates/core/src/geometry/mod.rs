//! Rigid-transform algebra and pose representations.
//!
//! A calibration is a rigid motion `H` mapping points from one sensor frame
//! into another. This module fixes the conventions the whole crate relies
//! on:
//!
//! - Euler angles are intrinsic ZYX: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
//!   Canonical ranges are yaw, roll in `(-pi, pi]` and pitch in
//!   `[-pi/2, pi/2]`. Gimbal lock (`|pitch|` within 1e-7 of `pi/2`) is
//!   resolved by reporting roll = 0 and letting yaw absorb the free angle.
//! - Quaternions are scalar-first `[w, x, y, z]` and sign-canonical: the
//!   first nonzero component is positive, so every rotation has exactly one
//!   encoding.
//! - Dual quaternions pair a unit real part `p` (the rotation) with a dual
//!   part `q = 0.5 * t_quat * p` where `t_quat = (0, tx, ty, tz)`, which
//!   makes `p . q = 0` hold by construction.

mod encode;
mod quat;

pub use encode::{
    decode_decalib, encode_decalib, DecalibRange, DecalibVector, Representation,
    DEFAULT_BALANCE_FACTOR,
};
pub use quat::{DualQuaternion, QuatPose};

use nalgebra::{Matrix3, Matrix4, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-entry tolerance for the orthonormality and determinant invariants.
pub const RIGID_TOL: f64 = 1e-9;

/// Pitch distance from `pi/2` below which the Euler decomposition switches
/// to the gimbal-lock branch.
const GIMBAL_EPS: f64 = 1e-7;

/// A rigid motion: orthonormal rotation (det +1) plus translation in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    /// Builds a transform, validating the rotation invariants.
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let gram = rotation.transpose() * rotation;
        let mut max_dev: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { 1.0 } else { 0.0 };
                max_dev = max_dev.max((gram[(i, j)] - target).abs());
            }
        }
        if max_dev > RIGID_TOL {
            return Err(Error::NotRigid {
                reason: format!("R^T R deviates from identity by {max_dev:.3e}"),
            });
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > RIGID_TOL {
            return Err(Error::NotRigid {
                reason: format!("det(R) = {det:.12} is not +1"),
            });
        }
        Ok(RigidTransform {
            rotation,
            translation,
        })
    }

    /// Builds a transform from parts already known to be rigid (products of
    /// valid rotations, hand-written axis rotations).
    pub(crate) fn from_parts_unchecked(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation,
            translation,
        }
    }

    pub fn identity() -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        RigidTransform {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// `self * other`: apply `other` first, then `self`.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    /// Inverse via the closed form `(R^T, -R^T t)`.
    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn apply_point(&self, point: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * point + self.translation
    }

    pub fn to_homogeneous(&self) -> Matrix4<f64> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.rotation);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    pub fn from_homogeneous(m: &Matrix4<f64>) -> Result<Self> {
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(Error::NotRigid {
                reason: "bottom row is not (0, 0, 0, 1)".to_string(),
            });
        }
        RigidTransform::new(
            m.fixed_view::<3, 3>(0, 0).into_owned(),
            m.fixed_view::<3, 1>(0, 3).into_owned(),
        )
    }

    /// Largest absolute entry difference over the 3x4 `[R | t]` block.
    pub fn max_abs_diff(&self, other: &RigidTransform) -> f64 {
        let mut max = 0.0f64;
        for i in 0..3 {
            for j in 0..3 {
                max = max.max((self.rotation[(i, j)] - other.rotation[(i, j)]).abs());
            }
            max = max.max((self.translation[i] - other.translation[i]).abs());
        }
        max
    }

    /// Nearest rotation by polar decomposition (via SVD), keeping det +1.
    ///
    /// Used to absorb limited-precision text serializations such as KITTI
    /// calibration files before constructing a validated transform.
    pub fn from_parts_orthonormalized(
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
    ) -> Result<Self> {
        let svd = rotation.svd(true, true);
        let u = svd.u.ok_or_else(|| Error::NotRigid {
            reason: "SVD failed".to_string(),
        })?;
        let v_t = svd.v_t.ok_or_else(|| Error::NotRigid {
            reason: "SVD failed".to_string(),
        })?;
        let mut r = u * v_t;
        if r.determinant() < 0.0 {
            // Flip the singular direction with the smallest singular value.
            let mut u_fixed = u;
            for i in 0..3 {
                u_fixed[(i, 2)] = -u_fixed[(i, 2)];
            }
            r = u_fixed * v_t;
        }
        RigidTransform::new(r, translation)
    }
}

/// Yaw/pitch/roll pose (radians) with translation (meters).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerPose {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
    pub translation: [f64; 3],
}

impl EulerPose {
    pub fn new(yaw: f64, pitch: f64, roll: f64, translation: [f64; 3]) -> Self {
        EulerPose {
            yaw,
            pitch,
            roll,
            translation,
        }
    }

    pub fn zero() -> Self {
        EulerPose::new(0.0, 0.0, 0.0, [0.0; 3])
    }

    pub fn translation_vec(&self) -> Vector3<f64> {
        Vector3::new(self.translation[0], self.translation[1], self.translation[2])
    }

    /// Equivalent pose with canonical angle ranges, obtained by composing to
    /// a rotation and decomposing again.
    pub fn canonicalized(&self) -> EulerPose {
        transform_to_euler(&euler_to_transform(self))
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * std::f64::consts::PI);
    if r > std::f64::consts::PI {
        r - 2.0 * std::f64::consts::PI
    } else {
        r
    }
}

fn rot_x(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c)
}

fn rot_y(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    let (s, c) = a.sin_cos();
    Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

/// Composes `Rz(yaw) * Ry(pitch) * Rx(roll)` with the pose translation.
pub fn euler_to_transform(pose: &EulerPose) -> RigidTransform {
    let r = rot_z(pose.yaw) * rot_y(pose.pitch) * rot_x(pose.roll);
    RigidTransform::from_parts_unchecked(r, pose.translation_vec())
}

/// Canonical ZYX decomposition.
///
/// At gimbal lock the decomposition is not unique; roll is reported as 0 and
/// yaw absorbs the remaining angle, deterministically.
pub fn transform_to_euler(h: &RigidTransform) -> EulerPose {
    let r = h.rotation();
    let sy = (-r[(2, 0)]).clamp(-1.0, 1.0);
    let pitch = sy.asin();
    let (yaw, roll) = if std::f64::consts::FRAC_PI_2 - pitch.abs() < GIMBAL_EPS {
        (wrap_angle(f64::atan2(-r[(0, 1)], r[(1, 1)])), 0.0)
    } else {
        (
            wrap_angle(f64::atan2(r[(1, 0)], r[(0, 0)])),
            wrap_angle(f64::atan2(r[(2, 1)], r[(2, 2)])),
        )
    };
    EulerPose {
        yaw,
        pitch,
        roll,
        translation: [h.translation[0], h.translation[1], h.translation[2]],
    }
}

/// Human-editable pose for config files: degrees for angles, meters for
/// translation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PoseSpec {
    pub yaw_deg: f64,
    pub pitch_deg: f64,
    pub roll_deg: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Default for PoseSpec {
    fn default() -> Self {
        PoseSpec {
            yaw_deg: 0.0,
            pitch_deg: 0.0,
            roll_deg: 0.0,
            x: 0.0,
            y: 0.0,
            z: 0.0,
        }
    }
}

impl PoseSpec {
    pub fn to_transform(&self) -> RigidTransform {
        euler_to_transform(&EulerPose::new(
            self.yaw_deg.to_radians(),
            self.pitch_deg.to_radians(),
            self.roll_deg.to_radians(),
            [self.x, self.y, self.z],
        ))
    }

    pub fn from_transform(h: &RigidTransform) -> Self {
        let e = transform_to_euler(h);
        PoseSpec {
            yaw_deg: e.yaw.to_degrees(),
            pitch_deg: e.pitch.to_degrees(),
            roll_deg: e.roll.to_degrees(),
            x: e.translation[0],
            y: e.translation[1],
            z: e.translation[2],
        }
    }
}

/// Draws a random rigid transform with rotation angles up to `max_angle_rad`
/// per axis and translation up to `max_trans_m` per axis. Test and sampling
/// helper; uniform per component.
pub fn random_transform(
    rng: &mut crate::rng::DetRng,
    max_angle_rad: f64,
    max_trans_m: f64,
) -> RigidTransform {
    let yaw = rng.uniform_in(-max_angle_rad, max_angle_rad);
    let pitch = rng.uniform_in(-max_angle_rad, max_angle_rad);
    let roll = rng.uniform_in(-max_angle_rad, max_angle_rad);
    let tx = rng.uniform_in(-max_trans_m, max_trans_m);
    let ty = rng.uniform_in(-max_trans_m, max_trans_m);
    let tz = rng.uniform_in(-max_trans_m, max_trans_m);
    euler_to_transform(&EulerPose::new(yaw, pitch, roll, [tx, ty, tz]))
}
