use serde::{Deserialize, Serialize};

use crate::drm::PlannerParams;
use crate::grasp::GraspSimParams;
use crate::kinematics::{presets, IkParams};
use crate::nav::{DriftParams, FollowerParams};
use crate::worldmodel::{ItemId, WorldError};

/// Extra attempts allowed after a failed one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryLimits {
    pub detection: u32,
    pub grasp: u32,
    pub motion: u32,
}

impl Default for RetryLimits {
    fn default() -> Self {
        Self { detection: 2, grasp: 2, motion: 2 }
    }
}

/// Injectable failure channels. Each rate is the probability that the channel
/// fires at one opportunity (one detection, one plan, one grasp execution, one
/// state entry for the e-stop and software channels).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultConfig {
    pub detection_miss_rate: f64,
    pub detection_misclass_rate: f64,
    pub motion_plan_fault_rate: f64,
    pub joint_control_error_rate: f64,
    pub collision_rate: f64,
    pub estop_rate: f64,
    pub software_fault_rate: f64,
    pub retries: RetryLimits,
}

impl FaultConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let rates = [
            ("detection_miss_rate", self.detection_miss_rate),
            ("detection_misclass_rate", self.detection_misclass_rate),
            ("motion_plan_fault_rate", self.motion_plan_fault_rate),
            ("joint_control_error_rate", self.joint_control_error_rate),
            ("collision_rate", self.collision_rate),
            ("estop_rate", self.estop_rate),
            ("software_fault_rate", self.software_fault_rate),
        ];
        for (field, value) in rates {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Probability { field, value });
            }
        }
        Ok(())
    }
}

/// Simulated durations of the manipulation and bookkeeping actions, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Durations {
    pub localize: f64,
    pub plan_tour: f64,
    pub relocalize: f64,
    pub detect: f64,
    pub plan_grasp: f64,
    pub plan_motion: f64,
    pub execute_grasp: f64,
    pub verify: f64,
    pub place: f64,
    /// Joint speed used to time arm motions, rad/s.
    pub joint_speed: f64,
}

impl Default for Durations {
    fn default() -> Self {
        Self {
            localize: 5.0,
            plan_tour: 1.0,
            relocalize: 2.0,
            detect: 3.0,
            plan_grasp: 0.5,
            plan_motion: 1.0,
            execute_grasp: 15.0,
            verify: 1.0,
            place: 10.0,
            joint_speed: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NavConfig {
    pub grid_resolution: f64,
    pub robot_radius: f64,
    /// Extra clearance kept by planned base paths on top of the robot radius, m.
    pub plan_margin: f64,
    pub obstacle_height: f64,
    /// Range of base-to-shelf-face distances searched for item goal poses, m.
    pub face_gap_min: f64,
    pub face_gap_max: f64,
    /// Residual position error after relocalization, m.
    pub relocalize_sigma: f64,
    pub follower: FollowerParams,
    pub drift: DriftParams,
}

impl Default for NavConfig {
    fn default() -> Self {
        Self {
            grid_resolution: 0.05,
            robot_radius: 0.45,
            plan_margin: 0.1,
            obstacle_height: 0.05,
            face_gap_min: 0.72,
            face_gap_max: 1.1,
            relocalize_sigma: 0.0,
            follower: FollowerParams { pos_tol: 0.01, yaw_tol: 0.02, ..FollowerParams::default() },
            drift: DriftParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ArmConfig {
    /// Stowed configuration the arm starts from and returns to.
    pub home: Vec<f64>,
    /// Distance in front of the shelf face where the tool stops before the
    /// straight approach, m.
    pub pregrasp_clearance: f64,
    /// Shelves closer to the base than this are put into the arm's world, m.
    pub world_radius: f64,
    pub planner: PlannerParams,
}

impl Default for ArmConfig {
    fn default() -> Self {
        Self {
            home: presets::desk_arm_home(),
            pregrasp_clearance: 0.15,
            world_radius: 2.0,
            planner: PlannerParams {
                ik: IkParams { pos_tol: 0.005, rot_tol: 0.1, ..IkParams::default() },
                ..PlannerParams::default()
            },
        }
    }
}

/// Everything a run needs besides the artifacts and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub faults: FaultConfig,
    pub durations: Durations,
    pub nav: NavConfig,
    pub arm: ArmConfig,
    pub grasp: GraspSimParams,
    /// Runs still going after this much simulated time are aborted, s.
    pub watchdog: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            faults: FaultConfig::default(),
            durations: Durations::default(),
            nav: NavConfig::default(),
            arm: ArmConfig::default(),
            grasp: GraspSimParams::default(),
            watchdog: 4.0 * 3600.0,
        }
    }
}

impl RunConfig {
    /// No injected faults and certain grasps.
    pub fn ideal() -> Self {
        Self { grasp: GraspSimParams::uniform(1.0), ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.faults.validate()?;
        for (field, p) in &self.grasp.success_probability {
            if !(0.0..=1.0).contains(p) {
                return Err(ConfigError::Invalid(format!("grasp.success_probability.{field:?} = {p} is outside [0, 1]")));
            }
        }
        let d = &self.durations;
        let all = [d.localize, d.plan_tour, d.relocalize, d.detect, d.plan_grasp, d.plan_motion, d.execute_grasp, d.verify, d.place];
        if all.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(ConfigError::Invalid("durations must be finite and non-negative".into()));
        }
        if !(d.joint_speed > 0.0) {
            return Err(ConfigError::Invalid("durations.joint_speed must be positive".into()));
        }
        let n = &self.nav;
        if !(n.grid_resolution > 0.0) || !(n.robot_radius >= 0.0) || !(n.plan_margin >= 0.0) || !(n.face_gap_min < n.face_gap_max) || !(n.relocalize_sigma >= 0.0) {
            return Err(ConfigError::Invalid("nav: need grid_resolution > 0, robot_radius >= 0, plan_margin >= 0, face_gap_min < face_gap_max".into()));
        }
        if !(n.follower.v_max > 0.0) || !(n.follower.rate_hz > 0.0) || !(n.follower.yaw_rate_max > 0.0) {
            return Err(ConfigError::Invalid("nav.follower: v_max, rate_hz and yaw_rate_max must be positive".into()));
        }
        if !(self.arm.pregrasp_clearance >= 0.0) || !(self.arm.world_radius > 0.0) {
            return Err(ConfigError::Invalid("arm: pregrasp_clearance >= 0 and world_radius > 0 required".into()));
        }
        if !(self.watchdog > 0.0) {
            return Err(ConfigError::Invalid("watchdog must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{field} = {value} is outside [0, 1]")]
    Probability { field: &'static str, value: f64 },
    #[error("{0}")]
    Invalid(String),
    #[error("shopping list references unknown item {0}")]
    UnknownItem(ItemId),
    #[error("item {0} is not inside any shelf")]
    ItemOffShelf(ItemId),
    #[error("arm home configuration: {0}")]
    Home(String),
    #[error("roadmap does not belong to the robot model")]
    ModelMismatch,
    #[error(transparent)]
    World(#[from] WorldError),
}
