use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kdtree::KdTree;
use super::{interpolate, segment_steps, DrmError};
use crate::geometry::Isometry;
use crate::kinematics::RobotModel;

/// Default spacing of collision samples along roadmap edges, rad.
pub const DEFAULT_EDGE_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoadmapParams {
    pub nodes: usize,
    pub neighbors: usize,
    pub seed: u64,
    pub edge_step: f64,
}

impl Default for RoadmapParams {
    fn default() -> Self {
        Self { nodes: 50_000, neighbors: 10, seed: 0, edge_step: DEFAULT_EDGE_STEP }
    }
}

/// Undirected configuration-space graph. Nodes are stored flat, `dof` values
/// per node; edges are `(a, b)` pairs with `a < b` in ascending order.
#[derive(Debug, Clone)]
pub struct Roadmap {
    dof: usize,
    nodes: Vec<f64>,
    edges: Vec<[u32; 2]>,
    edge_lengths: Vec<f64>,
    adj_offsets: Vec<u32>,
    // (neighbor, edge id)
    adj: Vec<[u32; 2]>,
    tool_poses: Vec<Isometry<f64>>,
    edge_step: f64,
    robot_digest: [u8; 32],
    node_tree: KdTree,
    tool_tree: KdTree,
}

pub fn joint_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Whether every sample of the segment `a -> b` at `step` spacing is free of
/// self-collision.
pub(crate) fn segment_self_free(model: &RobotModel<f64>, a: &[f64], b: &[f64], step: f64) -> Result<bool, DrmError> {
    let n = segment_steps(a, b, step);
    let mut q = vec![0.0; a.len()];
    for k in 0..=n {
        interpolate(a, b, k, n, &mut q);
        if model.self_collision(&q)? {
            return Ok(false);
        }
    }
    Ok(true)
}

impl Roadmap {
    /// Assembles a roadmap from parts, recomputing adjacency, lengths and
    /// cached tool poses.
    pub fn from_parts(
        model: &RobotModel<f64>,
        nodes: Vec<f64>,
        mut edges: Vec<[u32; 2]>,
        edge_step: f64,
    ) -> Result<Self, DrmError> {
        let dof = model.dof();
        if nodes.len() % dof != 0 {
            return Err(DrmError::Format("node array length is not a multiple of the DoF".into()));
        }
        let n = nodes.len() / dof;
        for e in &mut edges {
            if e[0] > e[1] {
                e.swap(0, 1);
            }
            if e[1] as usize >= n || e[0] == e[1] {
                return Err(DrmError::Format(format!("invalid edge {:?}", e)));
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let node = |i: u32| &nodes[i as usize * dof..(i as usize + 1) * dof];
        let edge_lengths = edges.iter().map(|e| joint_distance(node(e[0]), node(e[1]))).collect();
        let mut deg = vec![0u32; n + 1];
        for e in &edges {
            deg[e[0] as usize + 1] += 1;
            deg[e[1] as usize + 1] += 1;
        }
        for i in 0..n {
            deg[i + 1] += deg[i];
        }
        let adj_offsets = deg.clone();
        let mut fill = deg;
        let mut adj = vec![[0u32; 2]; edges.len() * 2];
        for (id, e) in edges.iter().enumerate() {
            for (from, to) in [(e[0], e[1]), (e[1], e[0])] {
                adj[fill[from as usize] as usize] = [to, id as u32];
                fill[from as usize] += 1;
            }
        }
        let tool_poses = (0..n)
            .into_par_iter()
            .map(|i| model.tool_pose(node(i as u32)))
            .collect::<Result<Vec<_>, _>>()?;
        let tool_points: Vec<f64> = tool_poses.iter().flat_map(|p| p.translation.to_array()).collect();
        Ok(Self {
            dof,
            node_tree: KdTree::new(dof, &nodes),
            tool_tree: KdTree::new(3, &tool_points),
            nodes,
            edges,
            edge_lengths,
            adj_offsets,
            adj,
            tool_poses,
            edge_step,
            robot_digest: model.to_file().digest(),
        })
    }

    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn node_count(&self) -> usize {
        self.tool_poses.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dof..(i + 1) * self.dof]
    }

    pub fn nodes_flat(&self) -> &[f64] {
        &self.nodes
    }

    pub fn edges(&self) -> &[[u32; 2]] {
        &self.edges
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        self.edge_lengths[e]
    }

    /// `(neighbor, edge id)` pairs of node `i`.
    pub fn neighbors(&self, i: usize) -> &[[u32; 2]] {
        &self.adj[self.adj_offsets[i] as usize..self.adj_offsets[i + 1] as usize]
    }

    pub fn tool_pose(&self, i: usize) -> &Isometry<f64> {
        &self.tool_poses[i]
    }

    pub fn edge_step(&self) -> f64 {
        self.edge_step
    }

    pub fn robot_digest(&self) -> &[u8; 32] {
        &self.robot_digest
    }

    pub fn matches_model(&self, model: &RobotModel<f64>) -> bool {
        model.to_file().digest() == self.robot_digest
    }

    /// Up to `k` nearest nodes to `q` accepted by `keep`.
    pub fn nearest_nodes(&self, q: &[f64], k: usize, keep: impl Fn(usize) -> bool) -> Vec<(usize, f64)> {
        self.node_tree.nearest(q, k, keep).into_iter().map(|(i, d2)| (i, d2.sqrt())).collect()
    }

    /// Nodes whose cached tool position lies within `radius` of `p`.
    pub fn nodes_near_tool_position(&self, p: [f64; 3], radius: f64) -> Vec<usize> {
        self.tool_tree.within(&p, radius)
    }
}

/// Samples a self-collision-free roadmap and links every node to its `k`
/// nearest neighbors along self-collision-free segments.
pub fn build_roadmap(model: &RobotModel<f64>, params: &RoadmapParams) -> Result<Roadmap, DrmError> {
    if params.nodes < 2 {
        return Err(DrmError::InvalidParams("roadmap needs at least two nodes"));
    }
    if params.neighbors < 1 {
        return Err(DrmError::InvalidParams("roadmap needs at least one neighbor per node"));
    }
    if !(params.edge_step > 0.0) {
        return Err(DrmError::InvalidParams("edge step must be positive"));
    }
    let dof = model.dof();
    let limits = model.limits();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let max_attempts = params.nodes.saturating_mul(100);
    let mut nodes = Vec::with_capacity(params.nodes * dof);
    let mut seen = std::collections::HashSet::new();
    let mut accepted = 0;
    let mut attempts = 0;
    // candidates are drawn sequentially from the seeded stream and checked in
    // batches, so the result does not depend on the thread count
    while accepted < params.nodes {
        let remaining = params.nodes - accepted;
        let batch = (remaining * 2).clamp(64, 65_536).min(max_attempts - attempts);
        if batch == 0 {
            return Err(DrmError::SamplingExhausted { accepted, attempts });
        }
        let cands: Vec<Vec<f64>> = (0..batch)
            .map(|_| limits.iter().map(|l| if l[1] > l[0] { rng.random_range(l[0]..=l[1]) } else { l[0] }).collect())
            .collect();
        attempts += batch;
        let free: Vec<bool> = cands
            .par_iter()
            .map(|q| model.self_collision(q).map(|c| !c))
            .collect::<Result<_, _>>()?;
        for (q, ok) in cands.into_iter().zip(free) {
            if !ok || accepted == params.nodes {
                continue;
            }
            // exact duplicates (a collapsed limit range) are kept once
            let key: Vec<u64> = q.iter().map(|v| v.to_bits()).collect();
            if !seen.insert(key) {
                continue;
            }
            nodes.extend_from_slice(&q);
            accepted += 1;
        }
        if seen.len() == 1 && limits.iter().all(|l| l[0] == l[1]) {
            break;
        }
    }
    let n = nodes.len() / dof;
    let tree = KdTree::new(dof, &nodes);
    let node = |i: usize| &nodes[i * dof..(i + 1) * dof];
    let mut pairs: Vec<[u32; 2]> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            tree.nearest(node(i), params.neighbors + 1, |j| j != i)
                .into_iter()
                .take(params.neighbors)
                .map(move |(j, _)| if i < j { [i as u32, j as u32] } else { [j as u32, i as u32] })
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();
    let keep: Vec<bool> = pairs
        .par_iter()
        .map(|e| segment_self_free(model, node(e[0] as usize), node(e[1] as usize), params.edge_step))
        .collect::<Result<_, _>>()?;
    let edges = pairs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| e).collect();
    Roadmap::from_parts(model, nodes, edges, params.edge_step)
}
