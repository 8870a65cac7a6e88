use serde::{Deserialize, Serialize};

use super::model::RobotModel;
use super::KinematicsError;
use crate::geometry::{Isometry, Vec3};
use crate::scalar::Real;

/// Damped least-squares IK settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IkParams<T> {
    pub pos_tol: T,
    pub rot_tol: T,
    pub max_iters: usize,
    /// Damping factor lambda; the normal matrix is `J J^T + lambda^2 I`.
    pub damping: T,
    /// Largest per-joint change in one iterate.
    pub max_step: T,
    /// Ignore the orientation part of the target.
    pub position_only: bool,
}

impl<T: Real> Default for IkParams<T> {
    fn default() -> Self {
        Self {
            pos_tol: T::lit(1e-4),
            rot_tol: T::lit(1e-3),
            max_iters: 300,
            damping: T::lit(1e-2),
            max_step: T::lit(0.2),
            position_only: false,
        }
    }
}

/// Position and orientation error of `current` relative to `target`, world frame.
pub fn pose_error<T: Real>(current: &Isometry<T>, target: &Isometry<T>) -> (Vec3<T>, Vec3<T>) {
    let dp = target.translation - current.translation;
    let dr = target.rotation.mul_mat(&current.rotation.transpose()).log();
    (dp, dr)
}

/// Solves `A x = b` for a small dense system by Gaussian elimination with
/// partial pivoting. Returns `None` for a singular matrix.
pub(crate) fn solve_dense<T: Real>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col] == T::zero() {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != T::zero() {
                for c in col..n {
                    let v = a[col][c];
                    a[r][c] -= f * v;
                }
                let v = b[col];
                b[r] -= f * v;
            }
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let mut s = b[r];
        for c in r + 1..n {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    Some(x)
}

impl<T: Real> RobotModel<T> {
    /// Damped least-squares IK from `seed`, projecting every iterate onto the
    /// joint limits. Succeeds only when the tolerance check passes on the
    /// returned, limit-respecting configuration.
    pub fn solve_ik(&self, target: &Isometry<T>, seed: &[T], params: &IkParams<T>) -> Result<Vec<T>, KinematicsError> {
        self.check_dim(seed)?;
        if !(params.pos_tol > T::zero()) || !(params.rot_tol > T::zero()) {
            return Err(KinematicsError::InvalidParams("tolerances must be positive"));
        }
        let rows = if params.position_only { 3 } else { 6 };
        let lambda2 = params.damping * params.damping;
        let mut q = seed.to_vec();
        self.clamp_to_limits(&mut q);
        let mut best = T::infinity();
        let mut since_best = 0usize;
        for _ in 0..=params.max_iters {
            let tool = self.tool_pose(&q)?;
            let (dp, dr) = pose_error(&tool, target);
            let pos_ok = dp.norm() <= params.pos_tol;
            let rot_ok = params.position_only || dr.norm() <= params.rot_tol;
            if pos_ok && rot_ok {
                return Ok(q);
            }
            let err_norm = (dp.norm_squared() + if params.position_only { T::zero() } else { dr.norm_squared() }).sqrt();
            if err_norm < best * T::lit(0.999) {
                best = err_norm;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best > 40 {
                    break;
                }
            }
            let e = [dp.x, dp.y, dp.z, dr.x, dr.y, dr.z];
            let jac = self.jacobian(&q)?;
            let n = jac.cols();
            let mut a = vec![vec![T::zero(); rows]; rows];
            for (r, row) in a.iter_mut().enumerate() {
                for (c, v) in row.iter_mut().enumerate() {
                    let mut s = T::zero();
                    for k in 0..n {
                        s += jac.get(r, k) * jac.get(c, k);
                    }
                    *v = s;
                }
                row[r] += lambda2;
            }
            let Some(y) = solve_dense(a, e[..rows].to_vec()) else { break };
            let mut dq: Vec<T> = (0..n).map(|k| (0..rows).map(|r| jac.get(r, k) * y[r]).sum()).collect();
            let largest = dq.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            if largest > params.max_step {
                let s = params.max_step / largest;
                dq.iter_mut().for_each(|v| *v *= s);
            }
            for (qi, d) in q.iter_mut().zip(&dq) {
                *qi += *d;
            }
            self.wrap_to_limits(&mut q);
        }
        Err(KinematicsError::IkFailure)
    }
}
