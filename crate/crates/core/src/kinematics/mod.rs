//! Serial-chain robot model: forward kinematics, Jacobian, damped
//! least-squares IK, sphere voxelization and self-collision.

mod collision;
mod fk;
mod ik;
mod model;
pub mod presets;

pub use collision::{sphere_voxels, sphere_voxels_until, spheres_self_collide, PlacedSphere};
pub use fk::{Jacobian, Kinematics};
pub use ik::{pose_error, IkParams};
pub use model::{
    rpy_of, CollisionSphere, Joint, JointKind, JointSpec, LimitSpec, OriginSpec, RobotFile, RobotModel, SphereSpec, ToolSpec,
};

#[derive(Debug, thiserror::Error)]
pub enum KinematicsError {
    #[error("configuration has {got} values, robot has {expected} degrees of freedom")]
    DimensionError { expected: usize, got: usize },
    #[error("inverse kinematics did not converge")]
    IkFailure,
    #[error("invalid robot model: {0}")]
    InvalidModel(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Isometry, Vec3};
    use std::f64::consts::{FRAC_PI_2, PI};

    fn arm() -> RobotModel<f64> {
        presets::planar_2r(1.0, 1.0, 0.1).build().unwrap()
    }

    #[test]
    fn planar_fk() {
        let m = arm();
        let t = m.tool_pose(&[0.0, 0.0]).unwrap().translation;
        assert!((t - Vec3::new(2.0, 0.0, 0.0)).norm() < 1e-12);
        let t = m.tool_pose(&[FRAC_PI_2, 0.0]).unwrap().translation;
        assert!((t - Vec3::new(0.0, 2.0, 0.0)).norm() < 1e-12);
        assert!(matches!(m.tool_pose(&[0.0]), Err(KinematicsError::DimensionError { expected: 2, got: 1 })));
    }

    #[test]
    fn planar_jacobian_at_zero() {
        let j = arm().jacobian(&[0.0, 0.0]).unwrap();
        assert!(j.get(0, 0).abs() < 1e-12);
        assert!((j.get(1, 0) - 2.0).abs() < 1e-12);
        assert!((j.get(1, 1) - 1.0).abs() < 1e-12);
        assert!((j.get(5, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn prismatic_column_has_no_angular_part() {
        let m: RobotModel<f64> = presets::whole_body().build().unwrap();
        let q = vec![0.3; m.dof()];
        let j = m.jacobian(&q).unwrap();
        for r in 3..6 {
            assert_eq!(j.get(r, 3), 0.0);
        }
        for r in 3..6 {
            assert_eq!(j.get(r, 0), 0.0);
            assert_eq!(j.get(r, 1), 0.0);
        }
    }

    #[test]
    fn ik_two_link_elbow() {
        let m = arm();
        let target = m.tool_pose(&[0.0, FRAC_PI_2]).unwrap();
        assert!((target.translation - Vec3::new(1.0, 1.0, 0.0)).norm() < 1e-12);
        let params = IkParams { pos_tol: 1e-7, rot_tol: 1e-7, ..IkParams::default() };
        let q = m.solve_ik(&target, &[0.3, 1.0], &params).unwrap();
        let got = m.tool_pose(&q).unwrap().translation;
        assert!((got - target.translation).norm() < 1e-6);
        assert!(q[0].abs() < 1e-5 && (q[1] - FRAC_PI_2).abs() < 1e-5, "{q:?}");
    }

    #[test]
    fn ik_unreachable() {
        let m = arm();
        let target = Isometry::from_translation(Vec3::new(3.0, 0.0, 0.0));
        let params = IkParams { position_only: true, ..IkParams::default() };
        assert!(matches!(m.solve_ik(&target, &[0.1, 0.1], &params), Err(KinematicsError::IkFailure)));
    }

    #[test]
    fn ik_fixed_point() {
        let m = arm();
        let q0 = [0.7, -1.1];
        let target = m.tool_pose(&q0).unwrap();
        assert_eq!(m.solve_ik(&target, &q0, &IkParams::default()).unwrap(), q0.to_vec());
    }

    #[test]
    fn self_collision_cases() {
        let m = arm();
        assert!(m.self_collision(&[0.0, PI]).unwrap());
        assert!(!m.self_collision(&[0.0, 0.0]).unwrap());
    }

    #[test]
    fn single_sphere_voxels() {
        let joints = presets::planar_2r(1.0, 1.0, 0.1).build::<f64>().unwrap();
        let m = joints.with_spheres(vec![CollisionSphere { link: 0, center: Vec3::zeros(), radius: 0.04 }]).unwrap();
        let v = m.robot_voxels(&[0.0, 0.0], Vec3::zeros(), 0.1).unwrap();
        // 0.04 + 0.0866 reaches the eight voxels sharing the origin corner only
        assert_eq!(v.len(), 8);
        assert!(v.contains(&crate::worldmodel::VoxelIndex::new(0, 0, 0)));
        assert!(v.contains(&crate::worldmodel::VoxelIndex::new(-1, 0, 0)));
        let empty = m.with_spheres(vec![]).unwrap();
        assert!(empty.robot_voxels(&[0.3, 0.2], Vec3::zeros(), 0.1).unwrap().is_empty());
    }

    #[test]
    fn file_round_trip() {
        let m: RobotModel<f64> = presets::desk_arm().build().unwrap();
        let again: RobotModel<f64> = m.to_file().build().unwrap();
        let q = [0.3, -0.2, 0.9, 0.4];
        let a = m.tool_pose(&q).unwrap();
        let b = again.tool_pose(&q).unwrap();
        assert!((a.translation - b.translation).norm() < 1e-12);
        assert!(a.rotation.max_abs_diff(&b.rotation) < 1e-12);
        assert!(m.self_collision(&presets::desk_arm_home()).map(|c| !c).unwrap());
    }

    #[test]
    fn desk_arm_tool_frame_convention() {
        let m: RobotModel<f64> = presets::desk_arm().build().unwrap();
        let t = m.tool_pose(&[0.0; 4]).unwrap();
        assert!((t.rotation.column(2) - Vec3::unit_x()).norm() < 1e-12);
        assert!((t.rotation.column(1) - Vec3::unit_z()).norm() < 1e-12);
        assert!((t.translation - Vec3::new(0.97, 0.0, 0.85)).norm() < 1e-12);
    }
}
