//! Minimal unit-quaternion arithmetic.
//!
//! Storage order is (w, x, y, z), rotations are right-handed and active.
//! Nothing here renormalizes implicitly: callers that construct or compose
//! quaternions are responsible for keeping them unit length.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

/// Quaternion in (w, x, y, z) order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat {
        w: 1.0,
        x: 0.0,
        y: 0.0,
        z: 0.0,
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Self {
        Quat { w, x, y, z }
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Quat::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.w, self.x, self.y, self.z]
    }

    /// Rotation of `angle` radians about `axis` (need not be unit).
    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 {
            return Quat::IDENTITY;
        }
        let (s, c) = (angle * 0.5).sin_cos();
        let u = axis / n;
        Quat::new(c, s * u.x, s * u.y, s * u.z)
    }

    /// Shortest rotation taking unit vector `from` to unit vector `to`.
    pub fn rotation_between(from: &Vector3<f64>, to: &Vector3<f64>) -> Self {
        let d = from.dot(to);
        if d < -1.0 + 1e-12 {
            // Antiparallel: rotate pi about any axis orthogonal to `from`.
            let ortho = if from.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            let axis = from.cross(&ortho);
            return Quat::from_axis_angle(&axis, std::f64::consts::PI);
        }
        let c = from.cross(to);
        let w = 1.0 + d;
        let q = Quat::new(w, c.x, c.y, c.z);
        q.normalized().unwrap_or(Quat::IDENTITY)
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    /// None when the norm is below 1e-12.
    pub fn normalized(&self) -> Option<Quat> {
        let n = self.norm();
        if n <= 1e-12 {
            return None;
        }
        Some(Quat::new(self.w / n, self.x / n, self.y / n, self.z / n))
    }

    pub fn is_unit(&self, tol: f64) -> bool {
        (self.norm() - 1.0).abs() <= tol
    }

    pub fn dot(&self, o: &Quat) -> f64 {
        self.w * o.w + self.x * o.x + self.y * o.y + self.z * o.z
    }

    /// Hamilton product `self ⊗ rhs` (applies `rhs` first when both are
    /// interpreted as rotations).
    pub fn hamilton(&self, rhs: &Quat) -> Quat {
        let (aw, ax, ay, az) = (self.w, self.x, self.y, self.z);
        let (bw, bx, by, bz) = (rhs.w, rhs.x, rhs.y, rhs.z);
        Quat::new(
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        )
    }

    /// Rotation matrix of a unit quaternion.
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
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

    /// Rotate a vector by this (unit) quaternion.
    pub fn rotate(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation_matrix() * v
    }
}
