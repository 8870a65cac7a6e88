use super::model::{JointKind, RobotModel};
use super::KinematicsError;
use crate::geometry::{Isometry, Mat3, Vec3};
use crate::scalar::Real;

/// World poses of every link plus the tool frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Kinematics<T> {
    pub link_poses: Vec<Isometry<T>>,
    pub tool: Isometry<T>,
}

/// 6 x DoF matrix mapping joint velocities to tool linear (rows 0..3) and
/// angular (rows 3..6) velocity, both in the world frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Jacobian<T> {
    pub columns: Vec<[T; 6]>,
}

impl<T: Real> Jacobian<T> {
    pub fn get(&self, row: usize, col: usize) -> T {
        self.columns[col][row]
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }
}

fn joint_motion<T: Real>(kind: JointKind, axis: Vec3<T>, q: &[T]) -> Isometry<T> {
    match kind {
        JointKind::Revolute => Isometry::new(Mat3::from_axis_angle(axis, q[0]), Vec3::zeros()),
        JointKind::Prismatic => Isometry::from_translation(axis * q[0]),
        JointKind::PlanarBase => Isometry::new(Mat3::rot_z(q[2]), Vec3::new(q[0], q[1], T::zero())),
    }
}

impl<T: Real> RobotModel<T> {
    pub fn forward_kinematics(&self, q: &[T]) -> Result<Kinematics<T>, KinematicsError> {
        self.check_dim(q)?;
        let mut link_poses = Vec::with_capacity(self.link_count());
        let mut current = Isometry::identity();
        link_poses.push(current);
        let mut k = 0;
        for j in self.joints() {
            let n = j.kind.dof();
            current = current.compose(&j.origin).compose(&joint_motion(j.kind, j.axis, &q[k..k + n]));
            link_poses.push(current);
            k += n;
        }
        let tool = link_poses[self.tool_link()].compose(self.tool_offset());
        Ok(Kinematics { link_poses, tool })
    }

    pub fn tool_pose(&self, q: &[T]) -> Result<Isometry<T>, KinematicsError> {
        Ok(self.forward_kinematics(q)?.tool)
    }

    /// Geometric Jacobian of the tool frame origin.
    pub fn jacobian(&self, q: &[T]) -> Result<Jacobian<T>, KinematicsError> {
        let kin = self.forward_kinematics(q)?;
        let p = kin.tool.translation;
        let mut columns = Vec::with_capacity(self.dof());
        let mut k = 0;
        for (ji, j) in self.joints().iter().enumerate() {
            let n = j.kind.dof();
            let frame = kin.link_poses[ji].compose(&j.origin);
            // joints beyond the tool link do not move the tool
            let moves_tool = ji < self.tool_link();
            let zero = [T::zero(); 6];
            match j.kind {
                JointKind::Revolute => {
                    let a = frame.transform_vector(j.axis);
                    let lin = a.cross(p - frame.translation);
                    columns.push(if moves_tool { [lin.x, lin.y, lin.z, a.x, a.y, a.z] } else { zero });
                }
                JointKind::Prismatic => {
                    let a = frame.transform_vector(j.axis);
                    columns.push(if moves_tool { [a.x, a.y, a.z, T::zero(), T::zero(), T::zero()] } else { zero });
                }
                JointKind::PlanarBase => {
                    let ex = frame.transform_vector(Vec3::unit_x());
                    let ey = frame.transform_vector(Vec3::unit_y());
                    let ez = frame.transform_vector(Vec3::unit_z());
                    let pivot = frame.transform_point(Vec3::new(q[k], q[k + 1], T::zero()));
                    let lin = ez.cross(p - pivot);
                    if moves_tool {
                        columns.push([ex.x, ex.y, ex.z, T::zero(), T::zero(), T::zero()]);
                        columns.push([ey.x, ey.y, ey.z, T::zero(), T::zero(), T::zero()]);
                        columns.push([lin.x, lin.y, lin.z, ez.x, ez.y, ez.z]);
                    } else {
                        columns.extend([zero; 3]);
                    }
                }
            }
            k += n;
        }
        Ok(Jacobian { columns })
    }
}
