//! Static k-d tree over points of a fixed runtime dimension.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
pub struct KdTree {
    dim: usize,
    points: Vec<f64>,
    // points permuted into tree order; `order[i]` is the caller's index
    order: Vec<u32>,
    nodes: Vec<KdNode>,
}

#[derive(Debug, Clone, Copy)]
struct KdNode {
    start: u32,
    end: u32,
    axis: u32,
    split: f64,
    left: u32,
    right: u32,
}

const LEAF: u32 = u32::MAX;
const LEAF_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Cand {
    d2: f64,
    idx: u32,
}

impl Eq for Cand {}

impl Ord for Cand {
    fn cmp(&self, o: &Self) -> Ordering {
        self.d2.total_cmp(&o.d2).then(self.idx.cmp(&o.idx))
    }
}

impl PartialOrd for Cand {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl KdTree {
    /// Builds a tree over `points`, a flat array of `dim`-vectors.
    pub fn new(dim: usize, points: &[f64]) -> Self {
        assert!(dim > 0 && points.len() % dim == 0);
        let n = points.len() / dim;
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut nodes = Vec::new();
        if n > 0 {
            build(dim, points, &mut order, 0, n, &mut nodes);
        }
        let mut permuted = Vec::with_capacity(points.len());
        for &i in &order {
            permuted.extend_from_slice(&points[i as usize * dim..(i as usize + 1) * dim]);
        }
        Self { dim, points: permuted, order, nodes }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn point(&self, slot: usize) -> &[f64] {
        &self.points[slot * self.dim..(slot + 1) * self.dim]
    }

    fn dist2(&self, slot: usize, q: &[f64]) -> f64 {
        self.point(slot).iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Up to `k` nearest points accepted by `keep`, as (index, squared
    /// distance) sorted by distance then index.
    pub fn nearest(&self, q: &[f64], k: usize, keep: impl Fn(usize) -> bool) -> Vec<(usize, f64)> {
        let mut heap = BinaryHeap::with_capacity(k + 1);
        if k > 0 && !self.nodes.is_empty() {
            self.knn_rec(0, q, k, &keep, &mut heap);
        }
        let mut out: Vec<Cand> = heap.into_vec();
        out.sort();
        out.into_iter().map(|c| (c.idx as usize, c.d2)).collect()
    }

    fn knn_rec(&self, ni: usize, q: &[f64], k: usize, keep: &impl Fn(usize) -> bool, heap: &mut BinaryHeap<Cand>) {
        let node = self.nodes[ni];
        if node.left == LEAF {
            for slot in node.start as usize..node.end as usize {
                let idx = self.order[slot];
                if !keep(idx as usize) {
                    continue;
                }
                let c = Cand { d2: self.dist2(slot, q), idx };
                if heap.len() < k {
                    heap.push(c);
                } else if c < *heap.peek().unwrap() {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        let diff = q[node.axis as usize] - node.split;
        let (near, far) = if diff < 0.0 { (node.left, node.right) } else { (node.right, node.left) };
        self.knn_rec(near as usize, q, k, keep, heap);
        if heap.len() < k || diff * diff <= heap.peek().unwrap().d2 {
            self.knn_rec(far as usize, q, k, keep, heap);
        }
    }

    /// Indices of all points within `radius` of `q`, ascending.
    pub fn within(&self, q: &[f64], radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.nodes.is_empty() {
            self.range_rec(0, q, radius * radius, &mut out);
        }
        out.sort_unstable();
        out
    }

    fn range_rec(&self, ni: usize, q: &[f64], r2: f64, out: &mut Vec<usize>) {
        let node = self.nodes[ni];
        if node.left == LEAF {
            for slot in node.start as usize..node.end as usize {
                if self.dist2(slot, q) <= r2 {
                    out.push(self.order[slot] as usize);
                }
            }
            return;
        }
        let diff = q[node.axis as usize] - node.split;
        if diff < 0.0 || diff * diff <= r2 {
            self.range_rec(node.left as usize, q, r2, out);
        }
        if diff >= 0.0 || diff * diff <= r2 {
            self.range_rec(node.right as usize, q, r2, out);
        }
    }
}

fn build(dim: usize, pts: &[f64], order: &mut [u32], start: usize, end: usize, nodes: &mut Vec<KdNode>) -> u32 {
    let id = nodes.len() as u32;
    nodes.push(KdNode { start: start as u32, end: end as u32, axis: 0, split: 0.0, left: LEAF, right: LEAF });
    if end - start <= LEAF_SIZE {
        return id;
    }
    let coord = |i: u32, a: usize| pts[i as usize * dim + a];
    let mut axis = 0;
    let mut spread = -1.0;
    for a in 0..dim {
        let (lo, hi) = order[start..end]
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(coord(i, a)), hi.max(coord(i, a))));
        if hi - lo > spread {
            spread = hi - lo;
            axis = a;
        }
    }
    if spread <= 0.0 {
        return id;
    }
    let mid = (start + end) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| coord(a, axis).total_cmp(&coord(b, axis)).then(a.cmp(&b)));
    let split = coord(order[mid], axis);
    let left = build(dim, pts, order, start, mid, nodes);
    let right = build(dim, pts, order, mid, end, nodes);
    let n = &mut nodes[id as usize];
    n.axis = axis as u32;
    n.split = split;
    n.left = left;
    n.right = right;
    id
}
