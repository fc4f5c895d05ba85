//! Rigid transforms and the pose algebra shared by every other module.
//!
//! Composition follows a frame-update convention: `compose(a, b)` applies `b`
//! after `a`, i.e. its homogeneous matrix is `M(b) * M(a)`. The companion
//! `inv_compose(a, b)` is the left-inverse of that product: it returns the
//! pose `x` with `compose(x, b) == a`, which makes it the natural "difference
//! relative to `b`" operator used for error terms and training labels.
//!
//! Rotations also travel in a 6 number form: the first two columns of the
//! rotation matrix, decoded back to an orthonormal frame by Gram-Schmidt.
//! That representation is continuous in the weights of a regressor, unlike
//! quaternions or Euler angles, and is what the residual models emit.

use nalgebra as na;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = na::Vector3<f64>;
pub type Mat3 = na::Matrix3<f64>;
pub type Mat4 = na::Matrix4<f64>;
pub type Quat = na::UnitQuaternion<f64>;

/// Quaternion norms farther than this from 1 are rejected instead of
/// silently renormalized.
pub const QUAT_NORM_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Se3Error {
    #[error("quaternion norm {norm} deviates from 1 by more than {tol}")]
    InvalidQuaternion { norm: f64, tol: f64 },
    #[error("6D rotation is degenerate: {reason}")]
    DegenerateRot6D { reason: &'static str },
}

/// A rigid transform stored as translation plus unit quaternion.
///
/// The quaternion is kept canonical (`w >= 0`) so that equal rotations
/// compare equal and serialized output is stable. On the wire a pose is the
/// 7-tuple `[tx, ty, tz, qw, qx, qy, qz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 7]", into = "[f64; 7]")]
pub struct Pose {
    pub translation: Vec3,
    pub rotation: Quat,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            translation: Vec3::zeros(),
            rotation: Quat::identity(),
        }
    }

    pub fn new(translation: Vec3, rotation: Quat) -> Self {
        Pose {
            translation,
            rotation: canonical(rotation),
        }
    }

    pub fn from_translation(translation: Vec3) -> Self {
        Pose::new(translation, Quat::identity())
    }

    /// Rotation about `axis` (need not be unit) by `angle` radians, no translation.
    pub fn from_axis_angle(axis: Vec3, angle: f64) -> Self {
        let axis = na::Unit::new_normalize(axis);
        Pose::new(Vec3::zeros(), Quat::from_axis_angle(&axis, angle))
    }

    pub fn matrix(&self) -> Mat4 {
        let mut m = Mat4::identity();
        m.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(self.rotation.to_rotation_matrix().matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.translation);
        m
    }

    /// Reads a homogeneous matrix whose upper-left block is orthonormal.
    /// The block is converted exactly, not re-orthonormalized, so feed it
    /// products of valid transforms only.
    pub fn from_matrix(m: &Mat4) -> Self {
        let r: Mat3 = m.fixed_view::<3, 3>(0, 0).into_owned();
        let rot = Quat::from_rotation_matrix(&na::Rotation3::from_matrix_unchecked(r));
        Pose::new(m.fixed_view::<3, 1>(0, 3).into_owned(), rot)
    }

    pub fn inverse(&self) -> Self {
        let inv_rot = self.rotation.inverse();
        Pose::new(-(inv_rot * self.translation), inv_rot)
    }

    /// Axis-angle vector of the rotation, with angle in `[0, pi]`.
    pub fn rotation_vector(&self) -> Vec3 {
        rotation_vector(&self.rotation)
    }

    /// Applies the transform to a point.
    pub fn transform_point(&self, p: &Vec3) -> Vec3 {
        self.rotation * p + self.translation
    }

    pub fn to_isometry(&self) -> na::Isometry3<f64> {
        na::Isometry3::from_parts(na::Translation3::from(self.translation), self.rotation)
    }

    pub fn from_isometry(iso: &na::Isometry3<f64>) -> Self {
        Pose::new(iso.translation.vector, iso.rotation)
    }
}

/// `q` and `-q` encode the same rotation; pick the `w >= 0` representative.
fn canonical(q: Quat) -> Quat {
    if q.w < 0.0 {
        Quat::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

/// Axis-angle vector with angle in `[0, pi]`, robust near the identity.
pub fn rotation_vector(q: &Quat) -> Vec3 {
    let q = canonical(*q);
    let v = q.imag();
    let vn = v.norm();
    if vn < 1e-12 {
        return Vec3::zeros();
    }
    let angle = 2.0 * vn.atan2(q.w);
    v * (angle / vn)
}

impl From<Pose> for [f64; 7] {
    fn from(p: Pose) -> Self {
        let t = p.translation;
        let q = p.rotation;
        [t.x, t.y, t.z, q.w, q.i, q.j, q.k]
    }
}

impl TryFrom<[f64; 7]> for Pose {
    type Error = Se3Error;

    fn try_from(v: [f64; 7]) -> Result<Self, Se3Error> {
        let raw = na::Quaternion::new(v[3], v[4], v[5], v[6]);
        let norm = raw.norm();
        if (norm - 1.0).abs() > QUAT_NORM_TOL {
            return Err(Se3Error::InvalidQuaternion {
                norm,
                tol: QUAT_NORM_TOL,
            });
        }
        // Keep already-unit input bit-exact so serialization round-trips;
        // renormalizing would divide by a norm of 1 +/- 1ulp.
        let rotation = if (norm - 1.0).abs() <= f64::EPSILON * 4.0 {
            Quat::new_unchecked(raw)
        } else {
            Quat::new_normalize(raw)
        };
        Ok(Pose::new(Vec3::new(v[0], v[1], v[2]), rotation))
    }
}

/// Applies `b` after `a`: the returned pose has matrix `M(b) * M(a)`.
pub fn compose(a: &Pose, b: &Pose) -> Pose {
    Pose::new(
        b.rotation * a.translation + b.translation,
        b.rotation * a.rotation,
    )
}

/// Difference of `a` relative to `b`: matrix `M(b)^-1 * M(a)`. Satisfies
/// `compose(inv_compose(a, b), b) == a`, so it recovers the left operand of
/// `compose`.
pub fn inv_compose(a: &Pose, b: &Pose) -> Pose {
    compose(a, &b.inverse())
}

/// Translation and rotation components of `inv_compose(a, b)`.
///
/// The translation is the offset from `b` to `a` expressed in `b`'s frame;
/// the rotation is an axis-angle vector, also in `b`'s frame. Norms of the
/// two parts are the geodesic pose distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseError {
    pub translation: Vec3,
    pub rotation: Vec3,
}

impl PoseError {
    pub fn trans_norm(&self) -> f64 {
        self.translation.norm()
    }

    pub fn rot_angle(&self) -> f64 {
        self.rotation.norm()
    }

    pub fn rot_angle_deg(&self) -> f64 {
        self.rot_angle().to_degrees()
    }
}

pub fn pose_error(a: &Pose, b: &Pose) -> PoseError {
    let delta = inv_compose(a, b);
    PoseError {
        translation: delta.translation,
        rotation: delta.rotation_vector(),
    }
}

/// First two columns of a rotation matrix, flattened column-major:
/// `[c1x, c1y, c1z, c2x, c2y, c2z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rot6D(pub [f64; 6]);

impl Rot6D {
    pub const IDENTITY: Rot6D = Rot6D([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

    pub fn from_rotation(q: &Quat) -> Self {
        let m = q.to_rotation_matrix();
        let m = m.matrix();
        Rot6D([
            m[(0, 0)],
            m[(1, 0)],
            m[(2, 0)],
            m[(0, 1)],
            m[(1, 1)],
            m[(2, 1)],
        ])
    }

    /// Gram-Schmidt decode. Errors when the first column is near zero or the
    /// two columns are near parallel; both leave the frame underdetermined.
    pub fn to_rotation(&self) -> Result<Quat, Se3Error> {
        let a = Vec3::new(self.0[0], self.0[1], self.0[2]);
        let b = Vec3::new(self.0[3], self.0[4], self.0[5]);
        let an = a.norm();
        if an <= 1e-6 {
            return Err(Se3Error::DegenerateRot6D {
                reason: "first column has near-zero norm",
            });
        }
        let c1 = a / an;
        let b_perp = b - c1 * b.dot(&c1);
        let bn = b_perp.norm();
        if bn <= 1e-6 {
            return Err(Se3Error::DegenerateRot6D {
                reason: "columns are near parallel",
            });
        }
        let c2 = b_perp / bn;
        let c3 = c1.cross(&c2);
        let r = Mat3::from_columns(&[c1, c2, c3]);
        Ok(Quat::from_rotation_matrix(
            &na::Rotation3::from_matrix_unchecked(r),
        ))
    }
}
