use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::KinematicsError;
use crate::geometry::{Isometry, Mat3, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum JointKind {
    Revolute,
    Prismatic,
    /// Ground-plane base: translation along x and y, then rotation about z.
    PlanarBase,
}

impl JointKind {
    pub fn dof(self) -> usize {
        match self {
            JointKind::Revolute | JointKind::Prismatic => 1,
            JointKind::PlanarBase => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint<T> {
    pub kind: JointKind,
    /// Unit axis in the joint frame (ignored by planar bases).
    pub axis: Vec3<T>,
    /// Fixed transform from the parent link to the joint frame.
    pub origin: Isometry<T>,
    /// One `[lo, hi]` pair per degree of freedom.
    pub limits: Vec<[T; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionSphere<T> {
    /// Link index: 0 is the root, `i + 1` the child of joint `i`.
    pub link: usize,
    pub center: Vec3<T>,
    pub radius: T,
}

/// Serial kinematic chain with sphere collision geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotModel<T> {
    joints: Vec<Joint<T>>,
    spheres: Vec<CollisionSphere<T>>,
    tool_link: usize,
    tool_offset: Isometry<T>,
    dof: usize,
}

impl<T: Real> RobotModel<T> {
    pub fn new(
        joints: Vec<Joint<T>>,
        spheres: Vec<CollisionSphere<T>>,
        tool_link: usize,
        tool_offset: Isometry<T>,
    ) -> Result<Self, KinematicsError> {
        let mut dof = 0;
        for (i, j) in joints.iter().enumerate() {
            if j.limits.len() != j.kind.dof() {
                return Err(KinematicsError::InvalidModel(format!(
                    "joint {i} has {} limit pairs, expected {}",
                    j.limits.len(),
                    j.kind.dof()
                )));
            }
            if j.limits.iter().any(|[lo, hi]| !(lo <= hi)) {
                return Err(KinematicsError::InvalidModel(format!("joint {i} limits must satisfy lo <= hi")));
            }
            if j.kind != JointKind::PlanarBase && (j.axis.norm() - T::one()).abs() > T::lit(1e-6) {
                return Err(KinematicsError::InvalidModel(format!("joint {i} axis is not unit length")));
            }
            dof += j.kind.dof();
        }
        let links = joints.len() + 1;
        if tool_link >= links {
            return Err(KinematicsError::InvalidModel(format!("tool link {tool_link} out of range")));
        }
        if let Some(s) = spheres.iter().find(|s| s.link >= links || !(s.radius > T::zero())) {
            return Err(KinematicsError::InvalidModel(format!(
                "sphere on link {} has bad link index or radius",
                s.link
            )));
        }
        Ok(Self { joints, spheres, tool_link, tool_offset, dof })
    }

    /// Checks the file-level invariants on top of `new`: at least two degrees of
    /// freedom and at least one collision sphere on every moving link.
    pub fn validate(&self) -> Result<(), KinematicsError> {
        if self.dof < 2 {
            return Err(KinematicsError::InvalidModel("robot needs at least 2 degrees of freedom".into()));
        }
        for link in 1..=self.joints.len() {
            if !self.spheres.iter().any(|s| s.link == link) {
                return Err(KinematicsError::InvalidModel(format!("link {link} has no collision sphere")));
            }
        }
        Ok(())
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn joints(&self) -> &[Joint<T>] {
        &self.joints
    }

    pub fn spheres(&self) -> &[CollisionSphere<T>] {
        &self.spheres
    }

    pub fn link_count(&self) -> usize {
        self.joints.len() + 1
    }

    pub fn tool_link(&self) -> usize {
        self.tool_link
    }

    pub fn tool_offset(&self) -> &Isometry<T> {
        &self.tool_offset
    }

    /// Flattened per-DoF limits.
    pub fn limits(&self) -> Vec<[T; 2]> {
        self.joints.iter().flat_map(|j| j.limits.iter().copied()).collect()
    }

    pub fn within_limits(&self, q: &[T]) -> bool {
        q.len() == self.dof && self.limits().iter().zip(q).all(|([lo, hi], v)| *v >= *lo && *v <= *hi)
    }

    pub fn clamp_to_limits(&self, q: &mut [T]) {
        for ([lo, hi], v) in self.limits().iter().zip(q.iter_mut()) {
            *v = v.max(*lo).min(*hi);
        }
    }

    /// Shifts rotational DoFs whose range spans a full turn by whole turns into
    /// their limits, then clamps the rest. The tool pose is unchanged by the shift.
    pub fn wrap_to_limits(&self, q: &mut [T]) {
        let turn = T::lit(std::f64::consts::TAU);
        let mut i = 0;
        for j in &self.joints {
            for (k, [lo, hi]) in j.limits.iter().enumerate() {
                let rotational = match j.kind {
                    JointKind::Revolute => true,
                    JointKind::Prismatic => false,
                    JointKind::PlanarBase => k == 2,
                };
                let v = &mut q[i + k];
                if rotational && *hi - *lo >= turn && (*v < *lo || *v > *hi) {
                    *v -= turn * ((*v - *lo) / turn).floor();
                }
                *v = v.max(*lo).min(*hi);
            }
            i += j.kind.dof();
        }
    }

    pub fn check_dim(&self, q: &[T]) -> Result<(), KinematicsError> {
        if q.len() == self.dof {
            Ok(())
        } else {
            Err(KinematicsError::DimensionError { expected: self.dof, got: q.len() })
        }
    }

    pub fn with_spheres(&self, spheres: Vec<CollisionSphere<T>>) -> Result<Self, KinematicsError> {
        Self::new(self.joints.clone(), spheres, self.tool_link, self.tool_offset)
    }

    pub fn cast<U: Real>(&self) -> RobotModel<U> {
        RobotModel {
            joints: self
                .joints
                .iter()
                .map(|j| Joint {
                    kind: j.kind,
                    axis: j.axis.cast(),
                    origin: j.origin.cast(),
                    limits: j.limits.iter().map(|[a, b]| [U::lit(a.to_f64_lossy()), U::lit(b.to_f64_lossy())]).collect(),
                })
                .collect(),
            spheres: self
                .spheres
                .iter()
                .map(|s| CollisionSphere { link: s.link, center: s.center.cast(), radius: U::lit(s.radius.to_f64_lossy()) })
                .collect(),
            tool_link: self.tool_link,
            tool_offset: self.tool_offset.cast(),
            dof: self.dof,
        }
    }
}

// ---- JSON robot file ----

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginSpec {
    #[serde(default)]
    pub xyz: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LimitSpec {
    Single([f64; 2]),
    Multi(Vec<[f64; 2]>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSpec {
    #[serde(rename = "type")]
    pub kind: JointKind,
    #[serde(default = "default_axis")]
    pub axis: [f64; 3],
    #[serde(default = "default_origin")]
    pub origin: OriginSpec,
    pub limits: LimitSpec,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn default_origin() -> OriginSpec {
    OriginSpec { xyz: [0.0; 3], rpy: [0.0; 3] }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereSpec {
    pub link: usize,
    pub center: [f64; 3],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolSpec {
    pub link: usize,
    pub offset: [f64; 3],
    #[serde(default)]
    pub rpy: [f64; 3],
}

/// On-disk robot description (meters, radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotFile {
    pub joints: Vec<JointSpec>,
    pub spheres: Vec<SphereSpec>,
    pub tool: ToolSpec,
}

impl RobotFile {
    pub fn load(path: &Path) -> Result<Self, KinematicsError> {
        let text = std::fs::read_to_string(path).map_err(|e| KinematicsError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, KinematicsError> {
        serde_json::from_str(text).map_err(|e| KinematicsError::InvalidModel(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("robot file serializes")
    }

    /// SHA-256 of the compact JSON encoding; ties persisted roadmaps to a robot.
    pub fn digest(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("robot file serializes");
        Sha256::digest(&bytes).into()
    }

    pub fn build<T: Real>(&self) -> Result<RobotModel<T>, KinematicsError> {
        let joints = self
            .joints
            .iter()
            .map(|j| {
                let limits = match &j.limits {
                    LimitSpec::Single(l) => vec![*l],
                    LimitSpec::Multi(v) => v.clone(),
                };
                Joint {
                    kind: j.kind,
                    axis: Vec3::from_array(j.axis).cast(),
                    origin: Isometry::from_xyz_rpy(j.origin.xyz, j.origin.rpy).cast(),
                    limits: limits.iter().map(|[a, b]| [T::lit(*a), T::lit(*b)]).collect(),
                }
            })
            .collect();
        let spheres = self
            .spheres
            .iter()
            .map(|s| CollisionSphere { link: s.link, center: Vec3::from_array(s.center).cast(), radius: T::lit(s.radius) })
            .collect();
        let tool = Isometry::from_xyz_rpy(self.tool.offset, self.tool.rpy).cast();
        let model = RobotModel::new(joints, spheres, self.tool.link, tool)?;
        model.validate()?;
        Ok(model)
    }
}

impl RobotModel<f64> {
    /// Inverse of [`RobotFile::build`]. Rotations are re-expressed as roll/pitch/yaw.
    pub fn to_file(&self) -> RobotFile {
        RobotFile {
            joints: self
                .joints
                .iter()
                .map(|j| JointSpec {
                    kind: j.kind,
                    axis: j.axis.to_array(),
                    origin: OriginSpec { xyz: j.origin.translation.to_array(), rpy: rpy_of(&j.origin.rotation) },
                    limits: if j.limits.len() == 1 { LimitSpec::Single(j.limits[0]) } else { LimitSpec::Multi(j.limits.clone()) },
                })
                .collect(),
            spheres: self
                .spheres
                .iter()
                .map(|s| SphereSpec { link: s.link, center: s.center.to_array(), radius: s.radius })
                .collect(),
            tool: ToolSpec {
                link: self.tool_link,
                offset: self.tool_offset.translation.to_array(),
                rpy: rpy_of(&self.tool_offset.rotation),
            },
        }
    }
}

/// Roll/pitch/yaw with `R = Rz(yaw) Ry(pitch) Rx(roll)`.
pub fn rpy_of(r: &Mat3<f64>) -> [f64; 3] {
    let m = &r.m;
    let pitch = (-m[2][0]).clamp(-1.0, 1.0).asin();
    if m[2][0].abs() < 1.0 - 1e-12 {
        [m[2][1].atan2(m[2][2]), pitch, m[1][0].atan2(m[0][0])]
    } else {
        // gimbal lock: fold roll into yaw
        [0.0, pitch, (-m[0][1]).atan2(m[1][1])]
    }
}
