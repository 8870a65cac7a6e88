use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::roadmap::Roadmap;
use super::{interpolate, segment_steps, DrmError};
use crate::geometry::{Isometry, Vec3};
use crate::kinematics::{sphere_voxels, sphere_voxels_until, spheres_self_collide, RobotModel};
use crate::worldmodel::{VoxelIndex, VoxelMap};

/// Occupancy threshold used when reading a world voxel map.
pub const OCCUPIED_MIN_COUNT: u64 = 1;

/// Dense voxel box: voxels `lo .. lo + dims` of the grid anchored at `origin`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec3 {
    pub origin: Vec3<f64>,
    pub resolution: f64,
    pub lo: [i32; 3],
    pub dims: [u32; 3],
}

impl GridSpec3 {
    pub fn len(&self) -> usize {
        self.dims.iter().map(|d| *d as usize).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn linear(&self, v: VoxelIndex) -> Option<usize> {
        let mut out = 0usize;
        for a in 0..3 {
            let d = v.0[a] as i64 - self.lo[a] as i64;
            if d < 0 || d >= self.dims[a] as i64 {
                return None;
            }
            out = out * self.dims[a] as usize + d as usize;
        }
        Some(out)
    }

    pub fn index(&self, mut lin: usize) -> VoxelIndex {
        let mut v = [0i32; 3];
        for a in (0..3).rev() {
            let d = self.dims[a] as usize;
            v[a] = self.lo[a] + (lin % d) as i32;
            lin /= d;
        }
        VoxelIndex(v)
    }

    /// Whether `world` uses exactly this grid's anchoring and resolution.
    pub fn aligned_with(&self, world: &VoxelMap<f64>) -> bool {
        world.resolution() == self.resolution && world.origin() == self.origin
    }
}

/// Voxel-indexed lists of roadmap nodes and edges.
///
/// Geometry on the root link does not move with the configuration; its voxels
/// are kept once in `static_voxels` and count as occupied by every node and
/// edge. Per-voxel lists hold the remaining, configuration-dependent geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionMap {
    pub(crate) grid: GridSpec3,
    pub(crate) edge_step: f64,
    pub(crate) node_count: usize,
    pub(crate) edge_count: usize,
    pub(crate) static_voxels: Vec<u32>,
    pub(crate) node_offsets: Vec<u32>,
    pub(crate) node_ids: Vec<u32>,
    pub(crate) edge_offsets: Vec<u32>,
    pub(crate) edge_ids: Vec<u32>,
    /// Edges with a self-colliding sample at `edge_step` spacing.
    pub(crate) self_blocked: Vec<u32>,
}

/// Lists stored for one voxel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoxelLists<'a> {
    /// The voxel is occupied by the static geometry, hence by every node and edge.
    pub all: bool,
    pub nodes: &'a [u32],
    pub edges: &'a [u32],
}

impl CollisionMap {
    pub fn grid(&self) -> &GridSpec3 {
        &self.grid
    }

    pub fn edge_step(&self) -> f64 {
        self.edge_step
    }

    pub fn static_voxels(&self) -> impl Iterator<Item = VoxelIndex> + '_ {
        self.static_voxels.iter().map(|l| self.grid.index(*l as usize))
    }

    pub fn lists(&self, v: VoxelIndex) -> VoxelLists<'_> {
        match self.grid.linear(v) {
            None => VoxelLists { all: false, nodes: &[], edges: &[] },
            Some(l) => VoxelLists {
                all: self.static_voxels.binary_search(&(l as u32)).is_ok(),
                nodes: &self.node_ids[self.node_offsets[l] as usize..self.node_offsets[l + 1] as usize],
                edges: &self.edge_ids[self.edge_offsets[l] as usize..self.edge_offsets[l + 1] as usize],
            },
        }
    }

    pub fn self_blocked_edges(&self) -> &[u32] {
        &self.self_blocked
    }

    pub fn list_entry_count(&self) -> usize {
        self.node_ids.len() + self.edge_ids.len()
    }
}

/// Conservative bound on how far any collision sphere can get from the root.
fn reach_bound(model: &RobotModel<f64>) -> f64 {
    use crate::kinematics::JointKind;
    let mut reach = 0.0;
    for j in model.joints() {
        reach += j.origin.translation.norm();
        match j.kind {
            JointKind::Revolute => {}
            JointKind::Prismatic => reach += j.limits[0][0].abs().max(j.limits[0][1].abs()),
            JointKind::PlanarBase => {
                let x = j.limits[0][0].abs().max(j.limits[0][1].abs());
                let y = j.limits[1][0].abs().max(j.limits[1][1].abs());
                reach += (x * x + y * y).sqrt();
            }
        }
    }
    reach + model.spheres().iter().map(|s| s.center.norm() + s.radius).fold(0.0, f64::max)
}

/// Voxels of the configuration-dependent spheres at `q`, appended as linear
/// indices of `grid`.
fn moving_voxels(model: &RobotModel<f64>, q: &[f64], grid: &GridSpec3, out: &mut Vec<u32>) -> Result<bool, DrmError> {
    let kin = model.forward_kinematics(q)?;
    let placed = model.placed_spheres(&kin);
    for s in placed.iter().filter(|s| s.link != 0) {
        sphere_voxels(s.center, s.radius, grid.origin, grid.resolution, |v| {
            out.push(grid.linear(v).expect("grid covers the reach bound") as u32);
        });
    }
    Ok(spheres_self_collide(&placed))
}

fn to_csr(total: usize, lists: &[Vec<u32>]) -> (Vec<u32>, Vec<u32>) {
    let mut offsets = vec![0u32; total + 1];
    for l in lists {
        for v in l {
            offsets[*v as usize + 1] += 1;
        }
    }
    for i in 0..total {
        offsets[i + 1] += offsets[i];
    }
    let mut fill: Vec<u32> = offsets[..total].to_vec();
    let mut ids = vec![0u32; offsets[total] as usize];
    for (id, l) in lists.iter().enumerate() {
        for v in l {
            ids[fill[*v as usize] as usize] = id as u32;
            fill[*v as usize] += 1;
        }
    }
    (offsets, ids)
}

/// Builds the voxel-to-node/edge index for `roadmap`. The grid is anchored at
/// `origin` with the given resolution; its extent is derived from the robot's
/// reach. Edges are swept at `edge_step` spacing.
pub fn build_collision_map(
    roadmap: &Roadmap,
    model: &RobotModel<f64>,
    origin: Vec3<f64>,
    resolution: f64,
    edge_step: f64,
) -> Result<CollisionMap, DrmError> {
    if !(edge_step > 0.0) {
        return Err(DrmError::InvalidParams("edge step must be positive"));
    }
    if !(resolution > 0.0) || !resolution.is_finite() || !origin.is_finite() {
        return Err(DrmError::InvalidParams("grid resolution must be positive and origin finite"));
    }
    if roadmap.dof() != model.dof() {
        return Err(DrmError::ModelMismatch);
    }
    let reach = reach_bound(model) + 2.0 * resolution;
    let r = Vec3::new(reach, reach, reach);
    let lo = crate::worldmodel::voxel_index_of(origin, resolution, -r);
    let hi = crate::worldmodel::voxel_index_of(origin, resolution, r);
    let dims = [0, 1, 2].map(|a| (hi.0[a] - lo.0[a] + 1) as u32);
    let grid = GridSpec3 { origin, resolution, lo: lo.0, dims };
    if grid.len() >= u32::MAX as usize {
        return Err(DrmError::InvalidParams("collision grid too large"));
    }

    let kin0 = model.forward_kinematics(&vec![0.0; model.dof()])?;
    let mut static_voxels = Vec::new();
    for s in model.placed_spheres(&kin0).iter().filter(|s| s.link == 0) {
        sphere_voxels(s.center, s.radius, origin, resolution, |v| static_voxels.push(grid.linear(v).unwrap() as u32));
    }
    static_voxels.sort_unstable();
    static_voxels.dedup();

    let node_lists: Vec<Vec<u32>> = (0..roadmap.node_count())
        .into_par_iter()
        .map(|i| {
            let mut out = Vec::new();
            moving_voxels(model, roadmap.node(i), &grid, &mut out)?;
            out.sort_unstable();
            out.dedup();
            Ok(out)
        })
        .collect::<Result<_, DrmError>>()?;
    let (node_offsets, node_ids) = to_csr(grid.len(), &node_lists);
    drop(node_lists);

    let edge_lists: Vec<(Vec<u32>, bool)> = roadmap
        .edges()
        .par_iter()
        .map(|e| {
            let (a, b) = (roadmap.node(e[0] as usize), roadmap.node(e[1] as usize));
            let n = segment_steps(a, b, edge_step);
            let mut q = vec![0.0; a.len()];
            let mut out = Vec::new();
            let mut self_hit = false;
            for k in 0..=n {
                interpolate(a, b, k, n, &mut q);
                self_hit |= moving_voxels(model, &q, &grid, &mut out)?;
                if out.len() > 4096 {
                    out.sort_unstable();
                    out.dedup();
                }
            }
            out.sort_unstable();
            out.dedup();
            out.shrink_to_fit();
            Ok((out, self_hit))
        })
        .collect::<Result<_, DrmError>>()?;
    let self_blocked = edge_lists.iter().enumerate().filter(|(_, (_, s))| *s).map(|(i, _)| i as u32).collect();
    let lists: Vec<Vec<u32>> = edge_lists.into_iter().map(|(l, _)| l).collect();
    let (edge_offsets, edge_ids) = to_csr(grid.len(), &lists);
    Ok(CollisionMap {
        grid,
        edge_step,
        node_count: roadmap.node_count(),
        edge_count: roadmap.edge_count(),
        static_voxels, node_offsets, node_ids, edge_offsets, edge_ids, self_blocked })
}

/// A sphere rigidly attached to the tool frame, e.g. part of a held item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttachedSphere {
    pub center: Vec3<f64>,
    pub radius: f64,
}

/// Active flags of roadmap nodes and edges after pruning.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActiveSet {
    pub nodes: Vec<bool>,
    pub edges: Vec<bool>,
}

impl ActiveSet {
    pub fn active_node_count(&self) -> usize {
        self.nodes.iter().filter(|a| **a).count()
    }

    pub fn active_edge_count(&self) -> usize {
        self.edges.iter().filter(|a| **a).count()
    }
}

/// Direct geometric collision checks of configurations against a voxel world.
#[derive(Debug, Clone, Copy)]
pub struct WorldChecker<'a> {
    pub model: &'a RobotModel<f64>,
    pub world: &'a VoxelMap<f64>,
    pub attached: &'a [AttachedSphere],
}

impl<'a> WorldChecker<'a> {
    pub fn new(model: &'a RobotModel<f64>, world: &'a VoxelMap<f64>, attached: &'a [AttachedSphere]) -> Self {
        Self { model, world, attached }
    }

    fn sphere_hits(&self, center: Vec3<f64>, radius: f64) -> bool {
        if self.world.is_empty() {
            return false;
        }
        sphere_voxels_until(center, radius, self.world.origin(), self.world.resolution(), |v| {
            self.world.is_occupied(v, OCCUPIED_MIN_COUNT)
        })
    }

    /// Robot spheres against the world, without self-collision.
    pub fn robot_hits_world(&self, q: &[f64]) -> Result<bool, DrmError> {
        let kin = self.model.forward_kinematics(q)?;
        Ok(self.model.placed_spheres(&kin).iter().any(|s| self.sphere_hits(s.center, s.radius)))
    }

    /// Attached spheres against the world, at the given tool pose.
    pub fn attached_hits_world(&self, tool: &Isometry<f64>) -> bool {
        self.attached.iter().any(|s| self.sphere_hits(tool.transform_point(s.center), s.radius))
    }

    /// Full check: no self-collision, robot and attached geometry clear of
    /// occupied voxels. Joint limits are not checked here.
    pub fn config_free(&self, q: &[f64]) -> Result<bool, DrmError> {
        let kin = self.model.forward_kinematics(q)?;
        let placed = self.model.placed_spheres(&kin);
        if spheres_self_collide(&placed) || placed.iter().any(|s| self.sphere_hits(s.center, s.radius)) {
            return Ok(false);
        }
        Ok(!self.attached_hits_world(&kin.tool))
    }

    /// Checks samples of the straight segment `a -> b` at `step` spacing,
    /// endpoints included.
    pub fn segment_free(&self, a: &[f64], b: &[f64], step: f64) -> Result<bool, DrmError> {
        let n = segment_steps(a, b, step);
        let mut q = vec![0.0; a.len()];
        for k in 0..=n {
            interpolate(a, b, k, n, &mut q);
            if !self.config_free(&q)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Deactivates every node and edge listed under an occupied world voxel, then
/// checks the attached bodies geometrically at the surviving nodes and edge
/// samples.
pub fn prune(
    roadmap: &Roadmap,
    cmap: &CollisionMap,
    model: &RobotModel<f64>,
    world: &VoxelMap<f64>,
    attached: &[AttachedSphere],
) -> Result<ActiveSet, DrmError> {
    if !cmap.grid.aligned_with(world) {
        return Err(DrmError::GridMismatch);
    }
    if cmap.node_count != roadmap.node_count() || cmap.edge_count != roadmap.edge_count() {
        return Err(DrmError::ModelMismatch);
    }
    let mut nodes = vec![true; roadmap.node_count()];
    let mut edges = vec![true; roadmap.edge_count()];
    for e in &cmap.self_blocked {
        edges[*e as usize] = false;
    }
    for v in world.occupied(OCCUPIED_MIN_COUNT) {
        let lists = cmap.lists(v);
        if lists.all {
            nodes.iter_mut().for_each(|a| *a = false);
            edges.iter_mut().for_each(|a| *a = false);
            return Ok(ActiveSet { nodes, edges });
        }
        for n in lists.nodes {
            nodes[*n as usize] = false;
        }
        for e in lists.edges {
            edges[*e as usize] = false;
        }
    }
    for (id, e) in roadmap.edges().iter().enumerate() {
        if !nodes[e[0] as usize] || !nodes[e[1] as usize] {
            edges[id] = false;
        }
    }
    if !attached.is_empty() && !world.is_empty() {
        let checker = WorldChecker::new(model, world, attached);
        let node_hit: Vec<bool> = (0..roadmap.node_count())
            .into_par_iter()
            .map(|i| nodes[i] && checker.attached_hits_world(roadmap.tool_pose(i)))
            .collect();
        for (a, hit) in nodes.iter_mut().zip(node_hit) {
            *a &= !hit;
        }
        let edge_hit: Vec<bool> = roadmap
            .edges()
            .par_iter()
            .enumerate()
            .map(|(id, e)| {
                if !edges[id] || !nodes[e[0] as usize] || !nodes[e[1] as usize] {
                    return Ok(true);
                }
                let (a, b) = (roadmap.node(e[0] as usize), roadmap.node(e[1] as usize));
                let n = segment_steps(a, b, cmap.edge_step);
                let mut q = vec![0.0; a.len()];
                for k in 1..n {
                    interpolate(a, b, k, n, &mut q);
                    if checker.attached_hits_world(&model.tool_pose(&q)?) {
                        return Ok(true);
                    }
                }
                Ok(false)
            })
            .collect::<Result<_, DrmError>>()?;
        for (a, hit) in edges.iter_mut().zip(edge_hit) {
            *a &= !hit;
        }
    }
    Ok(ActiveSet { nodes, edges })
}

/// Reference pruning by direct geometric checks of every node and edge sample.
pub fn prune_direct(
    roadmap: &Roadmap,
    cmap: &CollisionMap,
    model: &RobotModel<f64>,
    world: &VoxelMap<f64>,
    attached: &[AttachedSphere],
) -> Result<ActiveSet, DrmError> {
    let checker = WorldChecker::new(model, world, attached);
    let node_free = |i: usize| -> Result<bool, DrmError> {
        let q = roadmap.node(i);
        Ok(!checker.robot_hits_world(q)? && !checker.attached_hits_world(&model.tool_pose(q)?))
    };
    let nodes: Vec<bool> = (0..roadmap.node_count()).into_par_iter().map(node_free).collect::<Result<_, _>>()?;
    let edges: Vec<bool> = roadmap
        .edges()
        .par_iter()
        .map(|e| {
            let (a, b) = (roadmap.node(e[0] as usize), roadmap.node(e[1] as usize));
            let n = segment_steps(a, b, cmap.edge_step);
            let mut q = vec![0.0; a.len()];
            for k in 0..=n {
                interpolate(a, b, k, n, &mut q);
                let kin = model.forward_kinematics(&q)?;
                let placed = model.placed_spheres(&kin);
                if spheres_self_collide(&placed) || checker.robot_hits_world(&q)? || checker.attached_hits_world(&kin.tool) {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect::<Result<_, DrmError>>()?;
    Ok(ActiveSet { nodes, edges })
}
