use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::pose::{integrate, relocalize, OdomSample, PoseEstimate, PoseFuser, VoSample};
use super::{BasePose, NavError};
use crate::scalar::wrap_angle;
use crate::worldmodel::OccupancyGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FollowerParams {
    pub lookahead: f64,
    pub v_max: f64,
    pub yaw_rate_max: f64,
    pub rate_hz: f64,
    pub pos_tol: f64,
    pub yaw_tol: f64,
    /// Proportional gain on the remaining distance near the goal, 1/s.
    pub approach_gain: f64,
    /// Sim time without progress before giving up, s.
    pub stall_time: f64,
}

impl Default for FollowerParams {
    fn default() -> Self {
        Self {
            lookahead: 0.3,
            v_max: 0.5,
            yaw_rate_max: 1.5,
            rate_hz: 200.0,
            pos_tol: 0.05,
            yaw_tol: 0.1,
            approach_gain: 2.0,
            stall_time: 5.0,
        }
    }
}

/// Odometry and visual-odometry error model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftParams {
    /// Systematic odometry scale error, fraction of distance travelled.
    pub drift_rate: f64,
    /// Zero-mean odometry translation noise, m per sqrt(m) travelled.
    pub odom_noise: f64,
    /// Scale error of the visual-odometry track.
    pub vo_drift_rate: f64,
    pub vo_enabled: bool,
    pub vo_rate_hz: f64,
    pub vo_gain: f64,
}

impl Default for DriftParams {
    fn default() -> Self {
        Self { drift_rate: 0.0, odom_noise: 0.0, vo_drift_rate: 0.0, vo_enabled: true, vo_rate_hz: 5.0, vo_gain: 0.5 }
    }
}

/// Pseudo-holonomic base: commands are tracked perfectly by the true pose;
/// the estimate is fused from simulated odometry at the control rate and
/// visual odometry at its own rate.
#[derive(Debug, Clone)]
pub struct BaseSim {
    pub state: PoseEstimate,
    pub drift: DriftParams,
    pub time: f64,
    fuser: PoseFuser,
    vo_track: BasePose,
    ticks: u64,
    rng: ChaCha8Rng,
}

impl BaseSim {
    pub fn new(start: BasePose, drift: DriftParams, seed: u64) -> Self {
        Self {
            state: PoseEstimate::exact(start),
            drift,
            time: 0.0,
            fuser: PoseFuser::new(start, drift.vo_gain),
            vo_track: start,
            ticks: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Advances by `dt` under a robot-frame velocity command. `vo_every`
    /// control ticks a visual-odometry pose is fused.
    pub fn step(&mut self, vx: f64, vy: f64, w: f64, dt: f64, vo_every: u64) -> Result<(), NavError> {
        let (dx, dy, dyaw) = (vx * dt, vy * dt, w * dt);
        self.state.true_pose = integrate(&self.state.true_pose, dx, dy, dyaw);
        let d = (dx * dx + dy * dy).sqrt();
        let scale = 1.0 + self.drift.drift_rate;
        let (mut mx, mut my) = (dx * scale, dy * scale);
        if self.drift.odom_noise > 0.0 && d > 0.0 {
            let n = Normal::new(0.0, self.drift.odom_noise * d.sqrt()).expect("positive sigma");
            mx += n.sample(&mut self.rng);
            my += n.sample(&mut self.rng);
        }
        self.state.accumulated_drift += ((mx - dx).powi(2) + (my - dy).powi(2)).sqrt();
        self.ticks += 1;
        self.time += dt;
        self.state.estimated = self.fuser.odom(&OdomSample { t: self.time, dx: mx, dy: my, dyaw })?;
        let vs = 1.0 + self.drift.vo_drift_rate;
        self.vo_track = integrate(&self.vo_track, dx * vs, dy * vs, dyaw);
        if self.drift.vo_enabled && vo_every > 0 && self.ticks % vo_every == 0 {
            self.state.estimated = self.fuser.vo(&VoSample { t: self.time, pose: self.vo_track })?;
        }
        Ok(())
    }

    /// Resets the estimate (and the visual-odometry track) against the map.
    pub fn relocalize(&mut self, sigma: f64) {
        self.state = relocalize(&self.state, sigma, &mut self.rng);
        self.fuser.estimate = self.state.estimated;
        self.vo_track = self.state.estimated;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowReport {
    pub duration: f64,
    /// Distance driven by the true base, m.
    pub distance: f64,
    /// Largest distance of the estimated position from the planned polyline.
    pub max_cross_track: f64,
    pub final_estimate: BasePose,
    pub final_true: BasePose,
    pub steps: u64,
}

fn point_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> (f64, f64) {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = if len2 > 0.0 { (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0) } else { 0.0 };
    let q = [a[0] + t * ab[0], a[1] + t * ab[1]];
    (((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt(), t)
}

fn lerp2(a: [f64; 2], b: [f64; 2], t: f64) -> [f64; 2] {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Drives `sim` along `waypoints` with a pure-pursuit controller. The final
/// heading is `final_yaw` when given, the current heading otherwise.
pub fn follow_path(
    sim: &mut BaseSim,
    waypoints: &[[f64; 2]],
    final_yaw: Option<f64>,
    params: &FollowerParams,
    grid: Option<&OccupancyGrid<f64>>,
) -> Result<FollowReport, NavError> {
    let Some(&goal) = waypoints.last() else {
        return Err(NavError::InvalidInput("empty waypoint list"));
    };
    if let Some(g) = grid {
        if waypoints.iter().any(|w| g.is_occupied_at(w[0], w[1])) {
            return Err(NavError::FollowAbort("waypoint in an occupied cell"));
        }
    }
    let start = sim.state.estimated;
    let yaw_goal = final_yaw.map(wrap_angle).unwrap_or(start.yaw);
    let mut poly = vec![[start.x, start.y]];
    poly.extend_from_slice(waypoints);
    // suffix[k]: path length from vertex k to the goal
    let mut suffix = vec![0.0; poly.len()];
    for k in (0..poly.len() - 1).rev() {
        suffix[k] = suffix[k + 1] + dist(poly[k], poly[k + 1]);
    }
    let length = suffix[0];
    let dt = 1.0 / params.rate_hz;
    let vo_every = if sim.drift.vo_rate_hz > 0.0 { (params.rate_hz / sim.drift.vo_rate_hz).round().max(1.0) as u64 } else { 0 };
    let budget = 3.0 * length / params.v_max + std::f64::consts::PI / params.yaw_rate_max + 2.0 * params.stall_time;
    let t0 = sim.time;
    let mut report = FollowReport {
        duration: 0.0,
        distance: 0.0,
        max_cross_track: 0.0,
        final_estimate: start,
        final_true: sim.state.true_pose,
        steps: 0,
    };
    let mut seg = 0usize;
    let mut best_remaining = f64::INFINITY;
    let mut last_progress = sim.time;
    loop {
        let est = sim.state.estimated;
        let p = [est.x, est.y];
        let to_goal = dist(p, goal);
        let yaw_err = wrap_angle(yaw_goal - est.yaw);
        if to_goal <= params.pos_tol && yaw_err.abs() <= params.yaw_tol {
            break;
        }
        // advance along the polyline to the closest segment ahead
        while seg + 2 < poly.len() {
            let (d_now, _) = point_segment(p, poly[seg], poly[seg + 1]);
            let (d_next, _) = point_segment(p, poly[seg + 1], poly[seg + 2]);
            if d_next <= d_now {
                seg += 1;
            } else {
                break;
            }
        }
        let (cte, t) = point_segment(p, poly[seg], poly[seg + 1]);
        report.max_cross_track = report.max_cross_track.max(cte);
        // lookahead point: walk `lookahead` meters along the path from the projection
        let (a, b) = (poly[seg], poly[seg + 1]);
        let mut cur = lerp2(a, b, t);
        let mut left = params.lookahead;
        let mut k = seg + 1;
        let mut target = goal;
        while k < poly.len() {
            let d = dist(cur, poly[k]);
            if d >= left {
                let f = left / d;
                target = [cur[0] + f * (poly[k][0] - cur[0]), cur[1] + f * (poly[k][1] - cur[1])];
                break;
            }
            left -= d;
            cur = poly[k];
            k += 1;
        }
        let remaining = to_goal;
        let along = dist(lerp2(poly[seg], poly[seg + 1], t), poly[seg + 1]) + suffix[seg + 1];
        let (mut vx, mut vy) = (0.0, 0.0);
        if to_goal > params.pos_tol * 0.5 {
            let dir = [target[0] - p[0], target[1] - p[1]];
            let n = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
            if n > 0.0 {
                let speed = params.v_max.min(params.approach_gain * remaining);
                let (s, c) = est.yaw.sin_cos();
                let (wx, wy) = (dir[0] / n * speed, dir[1] / n * speed);
                vx = c * wx + s * wy;
                vy = -s * wx + c * wy;
            }
        }
        let w = (2.0 * yaw_err).clamp(-params.yaw_rate_max, params.yaw_rate_max);
        let before = sim.state.true_pose;
        sim.step(vx, vy, w, dt, vo_every)?;
        report.steps += 1;
        report.distance += before.distance_to(&sim.state.true_pose);
        if let Some(g) = grid {
            let tp = sim.state.true_pose;
            if g.is_occupied_at(tp.x, tp.y) {
                return Err(NavError::FollowAbort("base entered an occupied cell"));
            }
        }
        let progress = along.max(remaining) + yaw_err.abs() * 0.1;
        if progress < best_remaining - 1e-4 {
            best_remaining = progress;
            last_progress = sim.time;
        }
        if sim.time - last_progress > params.stall_time || sim.time - t0 > budget {
            return Err(NavError::FollowTimeout);
        }
    }
    report.duration = sim.time - t0;
    report.final_estimate = sim.state.estimated;
    report.final_true = sim.state.true_pose;
    Ok(report)
}
