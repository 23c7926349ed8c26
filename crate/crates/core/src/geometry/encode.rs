//! Decalibration target encoding.
//!
//! A decalibration transform is flattened into the fixed-width vector the
//! regressor trains against. Translation-derived slots are divided by the
//! per-axis training bound so they land in `[-1, 1]`; rotation-quaternion
//! slots are multiplied by the balance factor `f` so rotation and
//! translation contribute comparably to the loss.
//!
//! Slot layouts (unused trailing slots stay zero):
//!
//! | representation  | slots                                                  |
//! |-----------------|--------------------------------------------------------|
//! | euler           | `yaw/y, pitch/y, roll/y, tx/x, ty/x, tz/x`              |
//! | quaternion      | `f*w, f*qx, f*qy, f*qz, tx/x, ty/x, tz/x`               |
//! | dual-quaternion | `f*p0..f*p3, q0/x..q3/x`                                |
//!
//! where `x` is the translation bound in meters and `y` the rotation bound
//! in radians.

use serde::{Deserialize, Serialize};

use super::quat::{quat_norm, quat_scale, DualQuaternion, QuatPose};
use super::{euler_to_transform, transform_to_euler, EulerPose, RigidTransform};
use crate::error::{Error, Result};

/// Default balance factor applied to the rotation-quaternion slots.
pub const DEFAULT_BALANCE_FACTOR: f64 = 100.0;

/// Output representation of the regressor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Representation {
    Euler,
    Quaternion,
    DualQuaternion,
}

impl Representation {
    /// Number of active slots.
    pub fn width(&self) -> usize {
        match self {
            Representation::Euler => 6,
            Representation::Quaternion => 7,
            Representation::DualQuaternion => 8,
        }
    }

    pub fn all() -> [Representation; 3] {
        [
            Representation::Euler,
            Representation::Quaternion,
            Representation::DualQuaternion,
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            Representation::Euler => "euler",
            Representation::Quaternion => "quaternion",
            Representation::DualQuaternion => "dual-quaternion",
        }
    }
}

/// Per-axis decalibration bounds: translation in meters, rotation in
/// degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecalibRange {
    pub x_max_m: f64,
    pub y_max_deg: f64,
}

impl DecalibRange {
    pub fn new(x_max_m: f64, y_max_deg: f64) -> Result<Self> {
        if !(x_max_m >= 0.0) || !(y_max_deg >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "decalib range must be nonnegative, got {x_max_m} m / {y_max_deg} deg"
            )));
        }
        if y_max_deg >= 90.0 {
            return Err(Error::InvalidConfig(format!(
                "rotation bound {y_max_deg} deg must stay below 90 to avoid gimbal lock"
            )));
        }
        Ok(DecalibRange { x_max_m, y_max_deg })
    }

    pub fn y_max_rad(&self) -> f64 {
        self.y_max_deg.to_radians()
    }

    /// Strictly smaller in both bounds (expert-cascade ordering).
    pub fn strictly_finer_than(&self, coarser: &DecalibRange) -> bool {
        self.x_max_m < coarser.x_max_m && self.y_max_deg < coarser.y_max_deg
    }
}

/// Encoded network target / output vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecalibVector {
    values: [f64; 8],
    representation: Representation,
}

impl DecalibVector {
    /// Wraps raw network output; `raw` must have the representation width.
    pub fn from_raw(raw: &[f64], representation: Representation) -> Result<Self> {
        if raw.len() != representation.width() {
            return Err(Error::ShapeMismatch {
                op: "DecalibVector::from_raw",
                detail: format!(
                    "{} representation needs {} values, got {}",
                    representation.name(),
                    representation.width(),
                    raw.len()
                ),
            });
        }
        let mut values = [0.0; 8];
        values[..raw.len()].copy_from_slice(raw);
        Ok(DecalibVector {
            values,
            representation,
        })
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    /// Active slots only.
    pub fn values(&self) -> &[f64] {
        &self.values[..self.representation.width()]
    }
}

fn norm_div(value: f64, bound: f64) -> f64 {
    if bound == 0.0 {
        0.0
    } else {
        value / bound
    }
}

fn check_bound(component: &'static str, value: f64, bound: f64) -> Result<()> {
    let tol = 1e-9 * bound.max(1.0);
    if value.abs() > bound + tol {
        return Err(Error::DecalibOutOfRange {
            component,
            value,
            bound,
        });
    }
    Ok(())
}

/// Encodes a decalibration transform into normalized network targets.
///
/// The transform must lie within `ranges` per axis (checked through its
/// Euler decomposition).
pub fn encode_decalib(
    phi: &RigidTransform,
    representation: Representation,
    ranges: &DecalibRange,
    balance_factor: f64,
) -> Result<DecalibVector> {
    let euler = transform_to_euler(phi);
    let y = ranges.y_max_rad();
    let x = ranges.x_max_m;
    check_bound("yaw", euler.yaw, y)?;
    check_bound("pitch", euler.pitch, y)?;
    check_bound("roll", euler.roll, y)?;
    check_bound("tx", euler.translation[0], x)?;
    check_bound("ty", euler.translation[1], x)?;
    check_bound("tz", euler.translation[2], x)?;

    let mut values = [0.0; 8];
    match representation {
        Representation::Euler => {
            values[0] = norm_div(euler.yaw, y);
            values[1] = norm_div(euler.pitch, y);
            values[2] = norm_div(euler.roll, y);
            for i in 0..3 {
                values[3 + i] = norm_div(euler.translation[i], x);
            }
        }
        Representation::Quaternion => {
            let qp = QuatPose::from_transform(phi);
            for i in 0..4 {
                values[i] = balance_factor * qp.quaternion[i];
            }
            for i in 0..3 {
                values[4 + i] = norm_div(qp.translation[i], x);
            }
        }
        Representation::DualQuaternion => {
            let dq = DualQuaternion::from_transform(phi);
            for i in 0..4 {
                values[i] = balance_factor * dq.real[i];
                values[4 + i] = norm_div(dq.dual[i], x);
            }
        }
    }
    Ok(DecalibVector {
        values,
        representation,
    })
}

/// Inverse of [`encode_decalib`]; renormalizes off-manifold quaternion
/// slots, rejects degenerate ones.
pub fn decode_decalib(
    vector: &DecalibVector,
    ranges: &DecalibRange,
    balance_factor: f64,
) -> Result<RigidTransform> {
    let v = &vector.values;
    let y = ranges.y_max_rad();
    let x = ranges.x_max_m;
    match vector.representation {
        Representation::Euler => Ok(euler_to_transform(&EulerPose::new(
            v[0] * y,
            v[1] * y,
            v[2] * y,
            [v[3] * x, v[4] * x, v[5] * x],
        ))),
        Representation::Quaternion => {
            let q = quat_scale([v[0], v[1], v[2], v[3]], 1.0 / balance_factor);
            QuatPose {
                quaternion: q,
                translation: [v[4] * x, v[5] * x, v[6] * x],
            }
            .to_transform()
        }
        Representation::DualQuaternion => {
            let real = quat_scale([v[0], v[1], v[2], v[3]], 1.0 / balance_factor);
            let dual = [v[4] * x, v[5] * x, v[6] * x, v[7] * x];
            if quat_norm(real) < 1e-6 {
                return Err(Error::DegenerateRotation {
                    norm: quat_norm(real),
                });
            }
            DualQuaternion { real, dual }.to_transform()
        }
    }
}
