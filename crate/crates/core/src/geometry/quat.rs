//! Quaternion and dual-quaternion pose representations.

use nalgebra::{Matrix3, Vector3};

use super::RigidTransform;
use crate::error::{Error, Result};

/// Norm below which a decoded rotation quaternion is rejected.
const DEGENERATE_NORM: f64 = 1e-6;

/// Hamilton product of scalar-first quaternions.
pub(crate) fn quat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub(crate) fn quat_conj(q: [f64; 4]) -> [f64; 4] {
    [q[0], -q[1], -q[2], -q[3]]
}

pub(crate) fn quat_dot(a: [f64; 4], b: [f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

pub(crate) fn quat_norm(q: [f64; 4]) -> f64 {
    quat_dot(q, q).sqrt()
}

pub(crate) fn quat_scale(q: [f64; 4], s: f64) -> [f64; 4] {
    [q[0] * s, q[1] * s, q[2] * s, q[3] * s]
}

/// Flips sign so the first nonzero component is positive. `q` and `-q` are
/// the same rotation; this picks the unique encoding.
pub(crate) fn quat_canonicalize(mut q: [f64; 4]) -> [f64; 4] {
    for c in q {
        if c != 0.0 {
            if c < 0.0 {
                q = quat_scale(q, -1.0);
            }
            break;
        }
    }
    q
}

/// Unit quaternion of a rotation matrix (Shepperd's method), sign-canonical.
pub(crate) fn quat_from_rotation(r: &Matrix3<f64>) -> [f64; 4] {
    let trace = r[(0, 0)] + r[(1, 1)] + r[(2, 2)];
    let q = if trace > 0.0 {
        let s = (trace + 1.0).sqrt() * 2.0;
        [
            0.25 * s,
            (r[(2, 1)] - r[(1, 2)]) / s,
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(1, 0)] - r[(0, 1)]) / s,
        ]
    } else if r[(0, 0)] > r[(1, 1)] && r[(0, 0)] > r[(2, 2)] {
        let s = (1.0 + r[(0, 0)] - r[(1, 1)] - r[(2, 2)]).sqrt() * 2.0;
        [
            (r[(2, 1)] - r[(1, 2)]) / s,
            0.25 * s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
        ]
    } else if r[(1, 1)] > r[(2, 2)] {
        let s = (1.0 + r[(1, 1)] - r[(0, 0)] - r[(2, 2)]).sqrt() * 2.0;
        [
            (r[(0, 2)] - r[(2, 0)]) / s,
            (r[(0, 1)] + r[(1, 0)]) / s,
            0.25 * s,
            (r[(1, 2)] + r[(2, 1)]) / s,
        ]
    } else {
        let s = (1.0 + r[(2, 2)] - r[(0, 0)] - r[(1, 1)]).sqrt() * 2.0;
        [
            (r[(1, 0)] - r[(0, 1)]) / s,
            (r[(0, 2)] + r[(2, 0)]) / s,
            (r[(1, 2)] + r[(2, 1)]) / s,
            0.25 * s,
        ]
    };
    let n = quat_norm(q);
    quat_canonicalize(quat_scale(q, 1.0 / n))
}

/// Rotation matrix of a unit quaternion.
pub(crate) fn rotation_from_quat(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Unit quaternion (scalar-first, sign-canonical) with translation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuatPose {
    pub quaternion: [f64; 4],
    pub translation: [f64; 3],
}

impl QuatPose {
    pub fn from_transform(h: &RigidTransform) -> Self {
        let t = h.translation();
        QuatPose {
            quaternion: quat_from_rotation(h.rotation()),
            translation: [t[0], t[1], t[2]],
        }
    }

    /// Inverse conversion; renormalizes a slightly denormalized quaternion,
    /// rejects a degenerate one.
    pub fn to_transform(&self) -> Result<RigidTransform> {
        let n = quat_norm(self.quaternion);
        if n < DEGENERATE_NORM {
            return Err(Error::DegenerateRotation { norm: n });
        }
        let q = quat_scale(self.quaternion, 1.0 / n);
        Ok(RigidTransform::from_parts_unchecked(
            rotation_from_quat(q),
            Vector3::new(self.translation[0], self.translation[1], self.translation[2]),
        ))
    }
}

/// Dual quaternion `p + eps q`: unit real part `p` carries the rotation, the
/// dual part `q = 0.5 * (0, t) * p` carries the translation mixed with it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualQuaternion {
    pub real: [f64; 4],
    pub dual: [f64; 4],
}

impl DualQuaternion {
    pub fn identity() -> Self {
        DualQuaternion {
            real: [1.0, 0.0, 0.0, 0.0],
            dual: [0.0; 4],
        }
    }

    pub fn from_transform(h: &RigidTransform) -> Self {
        let p = quat_from_rotation(h.rotation());
        let t = h.translation();
        let t_quat = [0.0, t[0], t[1], t[2]];
        let q = quat_scale(quat_mul(t_quat, p), 0.5);
        DualQuaternion { real: p, dual: q }
    }

    /// Exact inverse of [`from_transform`](Self::from_transform) for unit
    /// inputs; inputs within 1e-6 of the constraints are renormalized as a
    /// uniformly scaled dual quaternion.
    pub fn to_transform(&self) -> Result<RigidTransform> {
        let n = quat_norm(self.real);
        if n < DEGENERATE_NORM {
            return Err(Error::DegenerateRotation { norm: n });
        }
        let p_unit = quat_scale(self.real, 1.0 / n);
        // t_quat = 2 q p* / |p|^2; any scalar residue from a non-orthogonal
        // dual part is dropped.
        let t_quat = quat_scale(quat_mul(self.dual, quat_conj(self.real)), 2.0 / (n * n));
        Ok(RigidTransform::from_parts_unchecked(
            rotation_from_quat(p_unit),
            Vector3::new(t_quat[1], t_quat[2], t_quat[3]),
        ))
    }

    /// `p . q`, zero for a valid unit dual quaternion.
    pub fn orthogonality(&self) -> f64 {
        quat_dot(self.real, self.dual)
    }

    pub fn real_norm(&self) -> f64 {
        quat_norm(self.real)
    }
}
