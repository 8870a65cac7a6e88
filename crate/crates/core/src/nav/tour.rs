use serde::{Deserialize, Serialize};

use super::NavError;

/// Largest odd-vertex count matched exactly by dynamic programming.
pub const EXACT_MATCHING_LIMIT: usize = 18;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tour {
    /// Visiting order over the cost-matrix indices, beginning at the start.
    pub order: Vec<usize>,
    /// The tour returns to `order[0]` after the last entry.
    pub closed: bool,
    pub cost: f64,
    /// Whether the odd-vertex matching was solved exactly.
    pub exact_matching: bool,
}

pub fn tour_cost(costs: &[Vec<f64>], order: &[usize]) -> f64 {
    if order.len() < 2 {
        return 0.0;
    }
    let legs: f64 = order.windows(2).map(|w| costs[w[0]][w[1]]).sum();
    legs + costs[*order.last().unwrap()][order[0]]
}

fn minimum_spanning_tree(c: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = c.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    best[0] = 0.0;
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 0..n {
        let u = (0..n).filter(|&v| !in_tree[v]).min_by(|&a, &b| best[a].total_cmp(&best[b]).then(a.cmp(&b))).unwrap();
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            edges.push((parent[u], u));
        }
        for v in 0..n {
            if !in_tree[v] && c[u][v] < best[v] {
                best[v] = c[u][v];
                parent[v] = u;
            }
        }
    }
    edges
}

/// Minimum-weight perfect matching of `verts` by DP over subsets.
fn exact_matching(c: &[Vec<f64>], verts: &[usize]) -> Vec<(usize, usize)> {
    let k = verts.len();
    let full = (1usize << k) - 1;
    let mut dp = vec![f64::INFINITY; 1 << k];
    let mut choice = vec![(0u8, 0u8); 1 << k];
    dp[0] = 0.0;
    for mask in 0..=full {
        if dp[mask].is_infinite() && mask != 0 {
            continue;
        }
        if mask == full {
            break;
        }
        // always match the lowest unmatched vertex
        let i = (!mask).trailing_zeros() as usize;
        for j in i + 1..k {
            if mask & (1 << j) != 0 {
                continue;
            }
            let next = mask | (1 << i) | (1 << j);
            let v = dp[mask] + c[verts[i]][verts[j]];
            if v < dp[next] {
                dp[next] = v;
                choice[next] = (i as u8, j as u8);
            }
        }
    }
    let mut out = Vec::new();
    let mut mask = full;
    while mask != 0 {
        let (i, j) = choice[mask];
        out.push((verts[i as usize], verts[j as usize]));
        mask &= !((1 << i) | (1 << j));
    }
    out
}

/// Repeatedly matches the globally closest remaining pair.
fn greedy_matching(c: &[Vec<f64>], verts: &[usize]) -> Vec<(usize, usize)> {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (a, &u) in verts.iter().enumerate() {
        for &v in &verts[a + 1..] {
            pairs.push((c[u][v], u, v));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut used = vec![false; c.len()];
    let mut out = Vec::new();
    for (_, u, v) in pairs {
        if !used[u] && !used[v] {
            used[u] = true;
            used[v] = true;
            out.push((u, v));
        }
    }
    out
}

/// Eulerian circuit of a connected multigraph with even degrees (Hierholzer).
fn euler_circuit(n: usize, edges: &[(usize, usize)], start: usize) -> Vec<usize> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for (id, &(a, b)) in edges.iter().enumerate() {
        adj[a].push((b, id));
        adj[b].push((a, id));
    }
    // visit neighbors in ascending order: pop from the back of reversed lists
    for l in &mut adj {
        l.sort_unstable();
        l.reverse();
    }
    let mut used = vec![false; edges.len()];
    let mut stack = vec![start];
    let mut circuit = Vec::new();
    while let Some(&u) = stack.last() {
        while let Some(&(_, id)) = adj[u].last() {
            if used[id] {
                adj[u].pop();
            } else {
                break;
            }
        }
        match adj[u].pop() {
            Some((v, id)) => {
                used[id] = true;
                stack.push(v);
            }
            None => {
                circuit.push(u);
                stack.pop();
            }
        }
    }
    circuit.reverse();
    circuit
}

/// Closed tour from `start` over every index of `costs` by Christofides'
/// construction. Odd-degree vertices are matched exactly up to
/// [`EXACT_MATCHING_LIMIT`] of them and greedily beyond.
pub fn plan_tour(costs: &[Vec<f64>], start: usize) -> Result<Tour, NavError> {
    plan_tour_with(costs, start, EXACT_MATCHING_LIMIT)
}

pub fn plan_tour_with(costs: &[Vec<f64>], start: usize, exact_limit: usize) -> Result<Tour, NavError> {
    let n = costs.len();
    if n == 0 || start >= n || costs.iter().any(|r| r.len() != n) {
        return Err(NavError::InvalidInput("cost matrix must be square and contain the start"));
    }
    let unreachable: Vec<usize> = (0..n).filter(|&j| !costs[start][j].is_finite() || !costs[j][start].is_finite()).collect();
    if !unreachable.is_empty() {
        return Err(NavError::Unreachable(unreachable));
    }
    if let Some(i) = (0..n).find(|&i| (0..n).any(|j| !costs[i][j].is_finite())) {
        return Err(NavError::Unreachable(vec![i]));
    }
    if n == 1 {
        return Ok(Tour { order: vec![start], closed: true, cost: 0.0, exact_matching: true });
    }
    let mut edges = minimum_spanning_tree(costs);
    let mut degree = vec![0usize; n];
    for &(a, b) in &edges {
        degree[a] += 1;
        degree[b] += 1;
    }
    let odd: Vec<usize> = (0..n).filter(|&v| degree[v] % 2 == 1).collect();
    let exact = odd.len() <= exact_limit;
    edges.extend(if exact { exact_matching(costs, &odd) } else { greedy_matching(costs, &odd) });
    let circuit = euler_circuit(n, &edges, start);
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for v in circuit {
        if !seen[v] {
            seen[v] = true;
            order.push(v);
        }
    }
    let cost = tour_cost(costs, &order);
    Ok(Tour { order, closed: true, cost, exact_matching: exact })
}

/// Optimal closed tour by enumerating all orders (small instances only).
pub fn brute_force_tour(costs: &[Vec<f64>], start: usize) -> (Vec<usize>, f64) {
    let rest: Vec<usize> = (0..costs.len()).filter(|&v| v != start).collect();
    let mut best = (Vec::new(), f64::INFINITY);
    let mut perm = rest.clone();
    permute(&mut perm, 0, &mut |p| {
        let mut order = vec![start];
        order.extend_from_slice(p);
        let c = tour_cost(costs, &order);
        if c < best.1 {
            best = (order, c);
        }
    });
    if rest.is_empty() {
        best = (vec![start], 0.0);
    }
    best
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}
