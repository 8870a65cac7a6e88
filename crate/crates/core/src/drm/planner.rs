use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::cmap::{prune, ActiveSet, AttachedSphere, CollisionMap, WorldChecker};
use super::roadmap::{joint_distance, Roadmap};
use super::{interpolate, segment_steps, DrmError};
use crate::geometry::Isometry;
use crate::kinematics::{pose_error, IkParams, KinematicsError, RobotModel};
use crate::worldmodel::VoxelMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPath {
    pub waypoints: Vec<Vec<f64>>,
    pub length: f64,
}

impl JointPath {
    pub fn new(waypoints: Vec<Vec<f64>>) -> Self {
        let length = waypoints.windows(2).map(|w| joint_distance(&w[0], &w[1])).sum();
        Self { waypoints, length }
    }

    pub fn len(&self) -> usize {
        self.waypoints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.waypoints.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// Tool-position radius of the goal neighborhood, m.
    pub neighborhood_radius: f64,
    /// Tool-orientation radius of the goal neighborhood, rad.
    pub neighborhood_angle: f64,
    /// Roadmap nodes the start configuration is linked to.
    pub start_links: usize,
    /// Cap on IK docking attempts per query.
    pub max_dock_attempts: usize,
    pub ik: IkParams<f64>,
    pub shortcut_iterations: usize,
    pub seed: u64,
}

impl Default for PlannerParams {
    fn default() -> Self {
        Self {
            neighborhood_radius: 0.15,
            neighborhood_angle: 0.5,
            start_links: 10,
            max_dock_attempts: 64,
            ik: IkParams::default(),
            shortcut_iterations: 100,
            seed: 0,
        }
    }
}

/// Timing and size figures of one query.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryStats {
    pub active_nodes: usize,
    pub active_edges: usize,
    pub neighborhood: usize,
    pub dock_attempts: usize,
    pub length_before_shortcut: f64,
}

fn meets_tolerance(pose: &Isometry<f64>, target: &Isometry<f64>, ik: &IkParams<f64>) -> bool {
    let (dp, dr) = pose_error(pose, target);
    dp.norm() <= ik.pos_tol && (ik.position_only || dr.norm() <= ik.rot_tol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(f64, u32);

impl Eq for Key {}

impl Ord for Key {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&o.0).then(self.1.cmp(&o.1))
    }
}

impl PartialOrd for Key {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}

/// Prunes the roadmap against `world` and plans from `start` to `target`.
pub fn plan_to_pose(
    roadmap: &Roadmap,
    cmap: &CollisionMap,
    model: &RobotModel<f64>,
    world: &VoxelMap<f64>,
    attached: &[AttachedSphere],
    start: &[f64],
    target: &Isometry<f64>,
    params: &PlannerParams,
) -> Result<(JointPath, QueryStats), DrmError> {
    model.check_dim(start)?;
    let checker = WorldChecker::new(model, world, attached);
    if !checker.config_free(start)? {
        return Err(DrmError::StartInCollision);
    }
    if !model.within_limits(start) {
        return Err(DrmError::InvalidParams("start configuration outside joint limits"));
    }
    if meets_tolerance(&model.tool_pose(start)?, target, &params.ik) {
        return Ok((JointPath::new(vec![start.to_vec()]), QueryStats::default()));
    }
    let active = prune(roadmap, cmap, model, world, attached)?;
    plan_with_active(roadmap, cmap, &checker, &active, start, target, params)
}

/// Plans against an already pruned roadmap.
pub fn plan_with_active(
    roadmap: &Roadmap,
    cmap: &CollisionMap,
    checker: &WorldChecker<'_>,
    active: &ActiveSet,
    start: &[f64],
    target: &Isometry<f64>,
    params: &PlannerParams,
) -> Result<(JointPath, QueryStats), DrmError> {
    let model = checker.model;
    let step = cmap.edge_step();
    let mut stats = QueryStats {
        active_nodes: active.active_node_count(),
        active_edges: active.active_edge_count(),
        ..Default::default()
    };
    if !checker.config_free(start)? {
        return Err(DrmError::StartInCollision);
    }

    let goals: Vec<usize> = roadmap
        .nodes_near_tool_position(target.translation.to_array(), params.neighborhood_radius)
        .into_iter()
        .filter(|&i| {
            active.nodes[i]
                && (params.ik.position_only || roadmap.tool_pose(i).rotation.angle_to(&target.rotation) <= params.neighborhood_angle)
        })
        .collect();
    stats.neighborhood = goals.len();

    // Dijkstra from the start, which is the extra vertex `n`
    let n = roadmap.node_count();
    let mut dist = vec![f64::INFINITY; n + 1];
    let mut prev = vec![u32::MAX; n + 1];
    let mut done = vec![false; n + 1];
    let mut heap = BinaryHeap::new();
    dist[n] = 0.0;
    heap.push(Reverse(Key(0.0, n as u32)));
    let mut is_goal = vec![false; n];
    for &g in &goals {
        is_goal[g] = true;
    }
    let mut goals_left = goals.len();
    while let Some(Reverse(Key(d, u))) = heap.pop() {
        let u = u as usize;
        if done[u] {
            continue;
        }
        done[u] = true;
        if u < n && is_goal[u] {
            goals_left -= 1;
            if goals_left == 0 {
                break;
            }
        }
        let mut relax = |v: usize, w: f64, heap: &mut BinaryHeap<Reverse<Key>>| {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                prev[v] = u as u32;
                heap.push(Reverse(Key(nd, v as u32)));
            }
        };
        if u == n {
            for (v, w) in roadmap.nearest_nodes(start, params.start_links, |i| active.nodes[i]) {
                if checker.segment_free(start, roadmap.node(v), step)? {
                    relax(v, w, &mut heap);
                }
            }
        } else {
            for &[v, e] in roadmap.neighbors(u) {
                if active.edges[e as usize] && !done[v as usize] {
                    relax(v as usize, roadmap.edge_length(e as usize), &mut heap);
                }
            }
        }
    }

    // candidate docking nodes by distance from the start; the start itself is
    // a candidate as well
    let mut cands: Vec<(f64, usize)> = goals.iter().filter(|g| dist[**g].is_finite()).map(|g| (dist[*g], *g)).collect();
    cands.push((0.0, n));
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for (d, node) in cands {
        if stats.dock_attempts >= params.max_dock_attempts {
            break;
        }
        if let Some((bl, _, _)) = &best {
            if d >= *bl {
                break;
            }
        }
        stats.dock_attempts += 1;
        let from = if node == n { start } else { roadmap.node(node) };
        let q = match model.solve_ik(target, from, &params.ik) {
            Ok(q) => q,
            Err(KinematicsError::IkFailure) => continue,
            Err(e) => return Err(e.into()),
        };
        let total = d + joint_distance(from, &q);
        let better = match &best {
            None => true,
            Some((bl, bn, _)) => total < *bl || (total == *bl && node < *bn),
        };
        if better && checker.segment_free(from, &q, step)? {
            best = Some((total, node, q));
        }
    }
    let Some((_, goal, q_goal)) = best else {
        let cause = if stats.neighborhood == 0 {
            "no active roadmap node near the target"
        } else {
            "no reachable neighborhood node could be docked"
        };
        return Err(DrmError::NoPath(cause.into()));
    };

    let mut waypoints = vec![q_goal];
    let mut cur = goal;
    while cur != n {
        waypoints.push(roadmap.node(cur).to_vec());
        cur = prev[cur] as usize;
    }
    waypoints.push(start.to_vec());
    waypoints.reverse();
    let path = JointPath::new(waypoints);
    stats.length_before_shortcut = path.length;
    let validator = |a: &[f64], b: &[f64]| checker.segment_free(a, b, step).unwrap_or(false);
    let path = shortcut(&path, &validator, params.shortcut_iterations, params.seed);
    Ok((path, stats))
}

/// Replaces random sub-paths by straight segments accepted by `valid`.
pub fn shortcut(path: &JointPath, valid: &dyn Fn(&[f64], &[f64]) -> bool, iterations: usize, seed: u64) -> JointPath {
    let mut wps = path.waypoints.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..iterations {
        if wps.len() < 3 {
            break;
        }
        let i = rng.random_range(0..wps.len() - 2);
        let j = rng.random_range(i + 2..wps.len());
        let direct = joint_distance(&wps[i], &wps[j]);
        let via: f64 = wps[i..=j].windows(2).map(|w| joint_distance(&w[0], &w[1])).sum();
        if direct <= via && valid(&wps[i], &wps[j]) {
            wps.drain(i + 1..j);
        }
    }
    let out = JointPath::new(wps);
    if out.length <= path.length {
        out
    } else {
        path.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathValidity {
    Ok,
    /// First offending segment; a single-waypoint path reports segment 0.
    Violation { segment: usize },
}

/// Samples every segment at `step` spacing and checks limits, self-collision,
/// and robot plus attached geometry against occupied voxels.
pub fn validate_path(
    path: &JointPath,
    world: &VoxelMap<f64>,
    model: &RobotModel<f64>,
    attached: &[AttachedSphere],
    step: f64,
) -> Result<PathValidity, DrmError> {
    if !(step > 0.0) {
        return Err(DrmError::InvalidParams("validation step must be positive"));
    }
    let checker = WorldChecker::new(model, world, attached);
    match path.waypoints.as_slice() {
        [] => return Ok(PathValidity::Ok),
        [q] => {
            model.check_dim(q)?;
            let ok = model.within_limits(q) && checker.config_free(q)?;
            return Ok(if ok { PathValidity::Ok } else { PathValidity::Violation { segment: 0 } });
        }
        _ => {}
    }
    for (i, w) in path.waypoints.windows(2).enumerate() {
        model.check_dim(&w[0])?;
        model.check_dim(&w[1])?;
        // segments between in-limit waypoints stay in limits
        if !model.within_limits(&w[0]) || !model.within_limits(&w[1]) {
            return Ok(PathValidity::Violation { segment: i });
        }
        let n = segment_steps(&w[0], &w[1], step);
        let mut q = vec![0.0; w[0].len()];
        for k in 0..=n {
            interpolate(&w[0], &w[1], k, n, &mut q);
            if !checker.config_free(&q)? {
                return Ok(PathValidity::Violation { segment: i });
            }
        }
    }
    Ok(PathValidity::Ok)
}
