//! Base navigation: goal poses in front of items, grid search, tour ordering,
//! path following, and the odometry / visual-odometry pose pipeline.

mod follow;
mod pose;
mod search;
mod tour;

pub use follow::{follow_path, BaseSim, DriftParams, FollowReport, FollowerParams};
pub use pose::{blend, fuse_pose, integrate, relocalize, OdomSample, PoseEstimate, PoseFuser, VoSample};
pub use search::{grid_dijkstra, grid_plan, pairwise_costs, GridPath, OctileCost};
pub use tour::{brute_force_tour, plan_tour, plan_tour_with, tour_cost, Tour, EXACT_MATCHING_LIMIT};

use serde::{Deserialize, Serialize};

use crate::scalar::wrap_angle;
use crate::worldmodel::{ItemRecord, OccupancyGrid};

/// Planar base pose; yaw is kept in (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasePose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl BasePose {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self { x, y, yaw: wrap_angle(yaw) }
    }

    pub fn distance_to(&self, o: &Self) -> f64 {
        ((self.x - o.x).powi(2) + (self.y - o.y).powi(2)).sqrt()
    }

    pub fn isometry(&self) -> crate::geometry::Isometry<f64> {
        crate::geometry::Isometry::from_xyz_yaw(self.x, self.y, 0.0, self.yaw)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NavError {
    #[error("no free base pose in front of the item")]
    GoalBlocked,
    #[error("grid cell {0:?} is occupied or outside the grid")]
    InvalidEndpoint((usize, usize)),
    #[error("no grid path")]
    NoPath,
    #[error("unreachable tour nodes {0:?}")]
    Unreachable(Vec<usize>),
    #[error("invalid input: {0}")]
    InvalidInput(&'static str),
    #[error("path following stalled")]
    FollowTimeout,
    #[error("path following aborted: {0}")]
    FollowAbort(&'static str),
    #[error("pose stream error: {0}")]
    StreamError(String),
}

/// First free pose along the item's outward axis between the two standoffs,
/// sampled at the grid resolution, facing the item.
pub fn item_goal_pose(item: &ItemRecord, grid: &OccupancyGrid<f64>, standoff_min: f64, standoff_max: f64) -> Result<BasePose, NavError> {
    if !(standoff_min < standoff_max) {
        return Err(NavError::InvalidInput("standoff_min must be below standoff_max"));
    }
    let [ox, oy] = item.outward_axis;
    let [px, py, _] = item.pose[..3] else { unreachable!() };
    let yaw = (-oy).atan2(-ox);
    let step = grid.spec.resolution;
    let n = ((standoff_max - standoff_min) / step).floor() as usize;
    for k in 0..=n {
        let s = standoff_min + k as f64 * step;
        let (x, y) = (px + ox * s, py + oy * s);
        if !grid.is_occupied_at(x, y) {
            return Ok(BasePose::new(x, y, yaw));
        }
    }
    Err(NavError::GoalBlocked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmodel::{GridSpec2, ItemAttributes, ItemId};

    fn item(x: f64, y: f64, out: [f64; 2]) -> ItemRecord {
        ItemRecord {
            id: ItemId(0),
            dims: [0.1; 3],
            mass: 0.5,
            pose: [x, y, 0.5, 0.0],
            outward_axis: out,
            attributes: ItemAttributes::default(),
            in_stock: 1,
            handle_anchor: None,
            grasp_type: None,
            extraction_type: None,
        }
    }

    fn grid() -> OccupancyGrid<f64> {
        OccupancyGrid::free(GridSpec2 { origin: [0.0, -1.0], resolution: 0.05, width: 120, height: 80 })
    }

    #[test]
    fn goal_in_free_space() {
        let p = item_goal_pose(&item(3.0, 1.0, [0.0, -1.0]), &grid(), 0.4, 1.0).unwrap();
        assert!((p.x - 3.0).abs() < 1e-12 && (p.y - 0.6).abs() < 1e-12);
        assert!((p.yaw - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn goal_blocked_and_partial() {
        let mut g = grid();
        let it = item(3.0, 1.0, [0.0, -1.0]);
        for j in 0..80 {
            for i in 55..65 {
                g.set(i, j, true);
            }
        }
        assert_eq!(item_goal_pose(&it, &g, 0.4, 1.0), Err(NavError::GoalBlocked));
        let mut g = grid();
        // block y in [0.3, 0.7)
        for j in 26..34 {
            for i in 0..120 {
                g.set(i, j, true);
            }
        }
        let p = item_goal_pose(&it, &g, 0.4, 1.0).unwrap();
        let oracle = (0..=12).map(|k| 0.4 + k as f64 * 0.05).find(|s| !g.is_occupied_at(3.0, 1.0 - s)).unwrap();
        assert!((p.y - (1.0 - oracle)).abs() < 1e-12);
    }
}
