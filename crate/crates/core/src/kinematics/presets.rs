//! Built-in robot descriptions.

use std::f64::consts::{FRAC_PI_2, PI};

use super::model::{JointKind, JointSpec, LimitSpec, OriginSpec, RobotFile, SphereSpec, ToolSpec};

fn revolute(axis: [f64; 3], xyz: [f64; 3], limits: [f64; 2]) -> JointSpec {
    JointSpec { kind: JointKind::Revolute, axis, origin: OriginSpec { xyz, rpy: [0.0; 3] }, limits: LimitSpec::Single(limits) }
}

fn spheres_along_x(link: usize, length: f64, spacing: f64, radius: f64, include_tip: bool) -> Vec<SphereSpec> {
    let n = (length / spacing).round() as usize;
    let mut out: Vec<SphereSpec> = (0..n)
        .map(|k| SphereSpec { link, center: [(k as f64 + 0.5) * spacing, 0.0, 0.0], radius })
        .collect();
    if include_tip {
        out.push(SphereSpec { link, center: [length, 0.0, 0.0], radius });
    }
    out
}

/// Two revolute joints about +z with links along +x, a root sphere at the
/// origin, and the tool at the tip of the second link.
pub fn planar_2r(l1: f64, l2: f64, radius: f64) -> RobotFile {
    let mut spheres = vec![SphereSpec { link: 0, center: [0.0; 3], radius }];
    spheres.extend(spheres_along_x(1, l1, 2.0 * radius, radius, false));
    spheres.extend(spheres_along_x(2, l2, 2.0 * radius, radius, true));
    RobotFile {
        joints: vec![revolute([0.0, 0.0, 1.0], [0.0; 3], [-PI, PI]), revolute([0.0, 0.0, 1.0], [l1, 0.0, 0.0], [-PI, PI])],
        spheres,
        tool: ToolSpec { link: 2, offset: [l2, 0.0, 0.0], rpy: [0.0; 3] },
    }
}

/// Height of the desk arm's shoulder yaw joint above the floor.
pub const DESK_ARM_MOUNT_HEIGHT: f64 = 0.75;

/// Four-joint arm (yaw, shoulder, elbow, wrist pitch) on a cylindrical mobile
/// base of radius 0.3 m. The tool frame's z axis is the approach direction and
/// points along +x at the zero configuration, with y up.
pub fn desk_arm() -> RobotFile {
    let mut spheres = vec![
        SphereSpec { link: 0, center: [0.0, 0.0, 0.35], radius: 0.3 },
        SphereSpec { link: 0, center: [0.0, 0.0, 0.5], radius: 0.25 },
        SphereSpec { link: 1, center: [0.0, 0.0, 0.04], radius: 0.06 },
    ];
    spheres.extend(spheres_along_x(2, 0.45, 0.09, 0.05, false));
    spheres.extend(spheres_along_x(3, 0.4, 0.08, 0.045, false));
    spheres.push(SphereSpec { link: 4, center: [0.04, 0.0, 0.0], radius: 0.04 });
    spheres.push(SphereSpec { link: 4, center: [0.1, 0.0, 0.0], radius: 0.03 });
    RobotFile {
        joints: vec![
            revolute([0.0, 0.0, 1.0], [0.0, 0.0, DESK_ARM_MOUNT_HEIGHT], [-1.6, 1.6]),
            revolute([0.0, 1.0, 0.0], [0.0, 0.0, 0.1], [-1.6, 1.6]),
            revolute([0.0, 1.0, 0.0], [0.45, 0.0, 0.0], [-2.6, 2.6]),
            revolute([0.0, 1.0, 0.0], [0.4, 0.0, 0.0], [-2.6, 2.6]),
        ],
        spheres,
        tool: ToolSpec { link: 4, offset: [0.12, 0.0, 0.0], rpy: [FRAC_PI_2, 0.0, FRAC_PI_2] },
    }
}

/// Tucked desk-arm configuration that stays clear of shelves next to the base.
pub fn desk_arm_home() -> Vec<f64> {
    vec![0.0, -1.2, 2.4, -1.2]
}

/// Whole-body chain: planar base (3), prismatic torso (1) and an 8-joint arm,
/// 12 degrees of freedom in total.
pub fn whole_body() -> RobotFile {
    let mut joints = vec![
        JointSpec {
            kind: JointKind::PlanarBase,
            axis: [0.0, 0.0, 1.0],
            origin: OriginSpec { xyz: [0.0; 3], rpy: [0.0; 3] },
            limits: LimitSpec::Multi(vec![[-20.0, 20.0], [-20.0, 20.0], [-PI, PI]]),
        },
        JointSpec {
            kind: JointKind::Prismatic,
            axis: [0.0, 0.0, 1.0],
            origin: OriginSpec { xyz: [0.1, 0.0, 0.6], rpy: [0.0; 3] },
            limits: LimitSpec::Single([0.0, 0.5]),
        },
    ];
    let axes = [[0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
    for (k, axis) in axes.iter().enumerate() {
        let xyz = if k == 0 { [0.0, -0.2, 0.3] } else { [0.15, 0.0, 0.0] };
        joints.push(revolute(*axis, xyz, [-2.5, 2.5]));
    }
    let mut spheres = vec![SphereSpec { link: 0, center: [0.0, 0.0, 0.3], radius: 0.3 }];
    spheres.push(SphereSpec { link: 1, center: [0.0, 0.0, 0.3], radius: 0.3 });
    spheres.push(SphereSpec { link: 2, center: [0.0, 0.0, 0.15], radius: 0.12 });
    for link in 3..=10 {
        spheres.push(SphereSpec { link, center: [0.08, 0.0, 0.0], radius: 0.05 });
    }
    RobotFile { joints, spheres, tool: ToolSpec { link: 10, offset: [0.1, 0.0, 0.0], rpy: [0.0; 3] } }
}
