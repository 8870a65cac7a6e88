//! Dynamic roadmap planner: an offline configuration-space graph plus a voxel
//! index of the nodes and edges the robot sweeps, pruned online against the
//! current voxel world.

mod cmap;
pub mod io;
mod kdtree;
mod planner;
mod roadmap;

pub use cmap::{
    build_collision_map, prune, prune_direct, ActiveSet, AttachedSphere, CollisionMap, GridSpec3, VoxelLists, WorldChecker,
    OCCUPIED_MIN_COUNT,
};
pub use kdtree::KdTree;
pub use planner::{plan_to_pose, plan_with_active, shortcut, validate_path, JointPath, PathValidity, PlannerParams, QueryStats};
pub use roadmap::{build_roadmap, joint_distance, Roadmap, RoadmapParams, DEFAULT_EDGE_STEP};

use crate::kinematics::KinematicsError;

#[derive(Debug, thiserror::Error)]
pub enum DrmError {
    #[error("sampling exhausted: {accepted} collision-free samples after {attempts} attempts")]
    SamplingExhausted { accepted: usize, attempts: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(&'static str),
    #[error("start configuration is in collision")]
    StartInCollision,
    #[error("no path: {0}")]
    NoPath(String),
    #[error("world voxel grid does not match the collision map grid")]
    GridMismatch,
    #[error("roadmap was built for a different robot")]
    ModelMismatch,
    #[error("roadmap file version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("malformed roadmap file: {0}")]
    Format(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}

/// Number of intervals used to sample the segment `a -> b` so that
/// consecutive samples are at most `step` apart.
pub fn segment_steps(a: &[f64], b: &[f64], step: f64) -> usize {
    ((joint_distance(a, b) / step).ceil() as usize).max(1)
}

/// Sample `k` of `n` on the segment `a -> b`. The expression is symmetric in
/// the endpoints, so walking an edge in either direction produces bitwise
/// identical samples.
pub fn interpolate(a: &[f64], b: &[f64], k: usize, n: usize, out: &mut [f64]) {
    let wb = k as f64 / n as f64;
    let wa = (n - k) as f64 / n as f64;
    for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
        *o = x * wa + y * wb;
    }
}
