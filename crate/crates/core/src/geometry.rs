//! Small fixed-size linear algebra: 3-vectors, 3x3 matrices and rigid transforms.

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub const fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn zeros() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }

    pub fn unit_x() -> Self {
        Self::new(T::one(), T::zero(), T::zero())
    }

    pub fn unit_y() -> Self {
        Self::new(T::zero(), T::one(), T::zero())
    }

    pub fn unit_z() -> Self {
        Self::new(T::zero(), T::zero(), T::one())
    }

    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Self::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm_squared(self) -> T {
        self.dot(self)
    }

    pub fn norm(self) -> T {
        self.norm_squared().sqrt()
    }

    /// Returns the unit vector, or `None` for a (near) zero vector.
    pub fn normalized(self) -> Option<Self> {
        let n = self.norm();
        if n > T::epsilon() {
            Some(self * (T::one() / n))
        } else {
            None
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn outer(self, o: Self) -> Mat3<T> {
        Mat3 {
            m: [
                [self.x * o.x, self.x * o.y, self.x * o.z],
                [self.y * o.x, self.y * o.y, self.y * o.z],
                [self.z * o.x, self.z * o.y, self.z * o.z],
            ],
        }
    }

    pub fn map(self, f: impl Fn(T) -> T) -> Self {
        Self::new(f(self.x), f(self.y), f(self.z))
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::lit(self.x.to_f64_lossy()),
            U::lit(self.y.to_f64_lossy()),
            U::lit(self.z.to_f64_lossy()),
        )
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Row-major 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3<T> {
    pub m: [[T; 3]; 3],
}

impl<T: Real> Default for Mat3<T> {
    fn default() -> Self {
        Self::zeros()
    }
}

impl<T: Real> Mat3<T> {
    pub fn zeros() -> Self {
        Self { m: [[T::zero(); 3]; 3] }
    }

    pub fn identity() -> Self {
        let mut r = Self::zeros();
        for i in 0..3 {
            r.m[i][i] = T::one();
        }
        r
    }

    pub fn from_columns(c0: Vec3<T>, c1: Vec3<T>, c2: Vec3<T>) -> Self {
        Self {
            m: [[c0.x, c1.x, c2.x], [c0.y, c1.y, c2.y], [c0.z, c1.z, c2.z]],
        }
    }

    pub fn column(&self, j: usize) -> Vec3<T> {
        Vec3::new(self.m[0][j], self.m[1][j], self.m[2][j])
    }

    pub fn transpose(&self) -> Self {
        let mut r = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = self.m[j][i];
            }
        }
        r
    }

    pub fn trace(&self) -> T {
        self.m[0][0] + self.m[1][1] + self.m[2][2]
    }

    pub fn mul_vec(&self, v: Vec3<T>) -> Vec3<T> {
        Vec3::new(
            self.m[0][0] * v.x + self.m[0][1] * v.y + self.m[0][2] * v.z,
            self.m[1][0] * v.x + self.m[1][1] * v.y + self.m[1][2] * v.z,
            self.m[2][0] * v.x + self.m[2][1] * v.y + self.m[2][2] * v.z,
        )
    }

    pub fn mul_mat(&self, o: &Self) -> Self {
        let mut r = Self::zeros();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = self.m[i][0] * o.m[0][j] + self.m[i][1] * o.m[1][j] + self.m[i][2] * o.m[2][j];
            }
        }
        r
    }

    pub fn scale(&self, s: T) -> Self {
        let mut r = *self;
        r.m.iter_mut().flatten().for_each(|v| *v *= s);
        r
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut r = *self;
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] += o.m[i][j];
            }
        }
        r
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.add(&o.scale(-T::one()))
    }

    pub fn determinant(&self) -> T {
        let m = &self.m;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    pub fn max_abs_diff(&self, o: &Self) -> T {
        let mut d = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                d = d.max((self.m[i][j] - o.m[i][j]).abs());
            }
        }
        d
    }

    /// Rotation of `angle` about the unit `axis` (Rodrigues).
    pub fn from_axis_angle(axis: Vec3<T>, angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        let t = T::one() - c;
        let Vec3 { x, y, z } = axis;
        Self {
            m: [
                [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
                [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
                [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
            ],
        }
    }

    pub fn rot_z(angle: T) -> Self {
        Self::from_axis_angle(Vec3::unit_z(), angle)
    }

    /// Fixed-axis roll/pitch/yaw: `Rz(yaw) * Ry(pitch) * Rx(roll)`.
    pub fn from_rpy(roll: T, pitch: T, yaw: T) -> Self {
        Self::rot_z(yaw)
            .mul_mat(&Self::from_axis_angle(Vec3::unit_y(), pitch))
            .mul_mat(&Self::from_axis_angle(Vec3::unit_x(), roll))
    }

    /// Rotation vector (axis * angle) of this rotation matrix.
    pub fn log(&self) -> Vec3<T> {
        let one = T::one();
        let two = T::lit(2.0);
        let cos = ((self.trace() - one) / two).max(-one).min(one);
        let angle = cos.acos();
        let skew = Vec3::new(
            self.m[2][1] - self.m[1][2],
            self.m[0][2] - self.m[2][0],
            self.m[1][0] - self.m[0][1],
        );
        if angle < T::lit(1e-7) {
            return skew * (one / two);
        }
        let sin = angle.sin();
        if sin > T::lit(1e-6) {
            return skew * (angle / (two * sin));
        }
        // angle close to pi: axis from the diagonal of (R + I) / 2
        let b = self.add(&Self::identity()).scale(one / two);
        let mut k = 0;
        for i in 1..3 {
            if b.m[i][i] > b.m[k][k] {
                k = i;
            }
        }
        let col = b.column(k);
        let axis = (col * (one / b.m[k][k].max(T::epsilon()).sqrt())).normalized().unwrap_or(Vec3::unit_x());
        let axis = if axis.dot(skew) < T::zero() { -axis } else { axis };
        axis * angle
    }

    /// Geodesic angle between two rotations.
    pub fn angle_to(&self, o: &Self) -> T {
        self.transpose().mul_mat(o).log().norm()
    }

    pub fn cast<U: Real>(&self) -> Mat3<U> {
        let mut r = Mat3::<U>::zeros();
        for i in 0..3 {
            for j in 0..3 {
                r.m[i][j] = U::lit(self.m[i][j].to_f64_lossy());
            }
        }
        r
    }
}

/// Rigid transform `p -> rotation * p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Isometry<T> {
    pub rotation: Mat3<T>,
    pub translation: Vec3<T>,
}

impl<T: Real> Default for Isometry<T> {
    fn default() -> Self {
        Self::identity()
    }
}

impl<T: Real> Isometry<T> {
    pub fn identity() -> Self {
        Self { rotation: Mat3::identity(), translation: Vec3::zeros() }
    }

    pub fn new(rotation: Mat3<T>, translation: Vec3<T>) -> Self {
        Self { rotation, translation }
    }

    pub fn from_translation(t: Vec3<T>) -> Self {
        Self::new(Mat3::identity(), t)
    }

    pub fn from_xyz_rpy(xyz: [T; 3], rpy: [T; 3]) -> Self {
        Self::new(Mat3::from_rpy(rpy[0], rpy[1], rpy[2]), Vec3::from_array(xyz))
    }

    /// Planar pose `(x, y, z)` with heading `yaw` about +z.
    pub fn from_xyz_yaw(x: T, y: T, z: T, yaw: T) -> Self {
        Self::new(Mat3::rot_z(yaw), Vec3::new(x, y, z))
    }

    pub fn compose(&self, o: &Self) -> Self {
        Self {
            rotation: self.rotation.mul_mat(&o.rotation),
            translation: self.rotation.mul_vec(o.translation) + self.translation,
        }
    }

    pub fn transform_point(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }

    pub fn transform_vector(&self, v: Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(v)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self { rotation: rt, translation: -rt.mul_vec(self.translation) }
    }

    pub fn cast<U: Real>(&self) -> Isometry<U> {
        Isometry { rotation: self.rotation.cast(), translation: self.translation.cast() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rodrigues_matches_rot_z() {
        let r = Mat3::<f64>::rot_z(PI / 2.0);
        let v = r.mul_vec(Vec3::unit_x());
        assert!((v - Vec3::unit_y()).norm() < 1e-12);
        assert!((r.determinant() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn log_round_trip() {
        for (axis, angle) in [
            (Vec3::new(1.0, 2.0, -0.5), 0.3),
            (Vec3::new(0.0, 0.0, 1.0), 1e-9),
            (Vec3::new(0.2, -1.0, 0.4), PI - 1e-9),
            (Vec3::new(1.0, 1.0, 0.0), PI),
        ] {
            let axis = axis.normalized().unwrap();
            let r = Mat3::from_axis_angle(axis, angle);
            let w = r.log();
            let back = Mat3::from_axis_angle(w.normalized().unwrap_or(axis), w.norm());
            assert!(back.max_abs_diff(&r) < 1e-6, "axis {axis:?} angle {angle}");
        }
    }

    #[test]
    fn isometry_inverse() {
        let t = Isometry::from_xyz_rpy([1.0, -2.0, 0.5], [0.1, 0.2, 0.3]);
        let id = t.compose(&t.inverse());
        assert!(id.rotation.max_abs_diff(&Mat3::identity()) < 1e-12);
        assert!(id.translation.norm() < 1e-12);
    }
}
