use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BasePose, NavError};
use crate::worldmodel::OccupancyGrid;

/// Exact 8-connected path cost: `straight + diagonal * sqrt(2)` grid steps.
/// Comparison is exact, so equal-cost paths compare equal regardless of the
/// order in which they were summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct OctileCost {
    pub straight: u32,
    pub diagonal: u32,
}

impl OctileCost {
    pub const ZERO: Self = Self { straight: 0, diagonal: 0 };
    pub const STRAIGHT: Self = Self { straight: 1, diagonal: 0 };
    pub const DIAGONAL: Self = Self { straight: 0, diagonal: 1 };

    /// Cost of the shortest unobstructed path between cells `d` apart.
    pub fn between(a: (usize, usize), b: (usize, usize)) -> Self {
        let dx = a.0.abs_diff(b.0) as u32;
        let dy = a.1.abs_diff(b.1) as u32;
        Self { straight: dx.max(dy) - dx.min(dy), diagonal: dx.min(dy) }
    }

    pub fn value(self) -> f64 {
        self.straight as f64 + self.diagonal as f64 * std::f64::consts::SQRT_2
    }

    pub fn add(self, o: Self) -> Self {
        Self { straight: self.straight + o.straight, diagonal: self.diagonal + o.diagonal }
    }
}

impl Ord for OctileCost {
    fn cmp(&self, o: &Self) -> Ordering {
        // compare a1 + b1 r with a2 + b2 r, r = sqrt(2): sign of da + db r
        let da = self.straight as i64 - o.straight as i64;
        let db = self.diagonal as i64 - o.diagonal as i64;
        let sign = |v: i64| v.cmp(&0);
        match (sign(da), sign(db)) {
            (Ordering::Equal, s) | (s, Ordering::Equal) => s,
            (a, b) if a == b => a,
            // opposite signs: compare da^2 against 2 db^2
            (a, _) => {
                let l = (da as i128) * (da as i128);
                let r = 2 * (db as i128) * (db as i128);
                if a == Ordering::Greater {
                    l.cmp(&r)
                } else {
                    r.cmp(&l)
                }
            }
        }
    }
}

impl PartialOrd for OctileCost {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPath {
    pub cells: Vec<(usize, usize)>,
    /// Cell centers, in meters.
    pub waypoints: Vec<[f64; 2]>,
    pub exact_cost: OctileCost,
    /// Path length in meters.
    pub cost: f64,
}

const MOVES: [(isize, isize, bool); 8] =
    [(1, 0, false), (-1, 0, false), (0, 1, false), (0, -1, false), (1, 1, true), (1, -1, true), (-1, 1, true), (-1, -1, true)];

fn neighbors(grid: &OccupancyGrid<f64>, c: usize) -> impl Iterator<Item = (usize, OctileCost)> + '_ {
    let w = grid.spec.width as isize;
    let h = grid.spec.height as isize;
    let (i, j) = ((c % grid.spec.width) as isize, (c / grid.spec.width) as isize);
    MOVES.iter().filter_map(move |&(dx, dy, diag)| {
        let (ni, nj) = (i + dx, j + dy);
        if ni < 0 || nj < 0 || ni >= w || nj >= h {
            return None;
        }
        let n = (nj * w + ni) as usize;
        if grid.occupied[n] {
            return None;
        }
        // diagonal moves may not cut obstacle corners
        if diag && (grid.occupied[(j * w + ni) as usize] || grid.occupied[(nj * w + i) as usize]) {
            return None;
        }
        Some((n, if diag { OctileCost::DIAGONAL } else { OctileCost::STRAIGHT }))
    })
}

fn check_endpoint(grid: &OccupancyGrid<f64>, c: (usize, usize)) -> Result<usize, NavError> {
    if c.0 >= grid.spec.width || c.1 >= grid.spec.height || grid.is_occupied(c.0, c.1) {
        return Err(NavError::InvalidEndpoint(c));
    }
    Ok(grid.spec.linear(c.0, c.1))
}

fn to_path(grid: &OccupancyGrid<f64>, prev: &[u32], goal: usize, cost: OctileCost) -> GridPath {
    let mut cells = vec![goal];
    let mut cur = goal;
    while prev[cur] != u32::MAX {
        cur = prev[cur] as usize;
        cells.push(cur);
    }
    cells.reverse();
    let w = grid.spec.width;
    let cells: Vec<(usize, usize)> = cells.into_iter().map(|c| (c % w, c / w)).collect();
    let waypoints = cells.iter().map(|&(i, j)| grid.spec.center(i, j)).collect();
    GridPath { cells, waypoints, exact_cost: cost, cost: cost.value() * grid.spec.resolution }
}

/// A* over the 8-connected free cells with the octile heuristic.
pub fn grid_plan(grid: &OccupancyGrid<f64>, start: (usize, usize), goal: (usize, usize)) -> Result<GridPath, NavError> {
    let s = check_endpoint(grid, start)?;
    let g = check_endpoint(grid, goal)?;
    let n = grid.spec.len();
    let mut best = vec![None::<OctileCost>; n];
    let mut prev = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    let h = |c: usize| OctileCost::between((c % grid.spec.width, c / grid.spec.width), goal);
    best[s] = Some(OctileCost::ZERO);
    open.push(Reverse((h(s), Reverse(OctileCost::ZERO), s)));
    while let Some(Reverse((_, Reverse(gc), c))) = open.pop() {
        if closed[c] {
            continue;
        }
        if c == g {
            return Ok(to_path(grid, &prev, g, gc));
        }
        closed[c] = true;
        for (nb, step) in neighbors(grid, c) {
            if closed[nb] {
                continue;
            }
            let ng = gc.add(step);
            if best[nb].is_none_or(|b| ng < b) {
                best[nb] = Some(ng);
                prev[nb] = c as u32;
                open.push(Reverse((ng.add(h(nb)), Reverse(ng), nb)));
            }
        }
    }
    Err(NavError::NoPath)
}

/// Exact single-source shortest path costs to every cell (`None` when
/// unreachable).
pub fn grid_dijkstra(grid: &OccupancyGrid<f64>, start: (usize, usize)) -> Result<Vec<Option<OctileCost>>, NavError> {
    let s = check_endpoint(grid, start)?;
    let mut dist = vec![None::<OctileCost>; grid.spec.len()];
    let mut done = vec![false; grid.spec.len()];
    let mut heap = BinaryHeap::new();
    dist[s] = Some(OctileCost::ZERO);
    heap.push(Reverse((OctileCost::ZERO, s)));
    while let Some(Reverse((d, c))) = heap.pop() {
        if done[c] {
            continue;
        }
        done[c] = true;
        for (nb, step) in neighbors(grid, c) {
            let nd = d.add(step);
            if !done[nb] && dist[nb].is_none_or(|b| nd < b) {
                dist[nb] = Some(nd);
                heap.push(Reverse((nd, nb)));
            }
        }
    }
    Ok(dist)
}

/// Symmetric matrix of grid path lengths between base poses, in meters.
/// Unreachable pairs hold `f64::INFINITY`.
pub fn pairwise_costs(grid: &OccupancyGrid<f64>, poses: &[BasePose]) -> Result<Vec<Vec<f64>>, NavError> {
    let cells: Vec<(usize, usize)> = poses
        .iter()
        .map(|p| grid.spec.cell_of(p.x, p.y).ok_or(NavError::InvalidEndpoint((usize::MAX, usize::MAX))))
        .collect::<Result<_, _>>()?;
    for c in &cells {
        check_endpoint(grid, *c)?;
    }
    let rows: Vec<Vec<Option<OctileCost>>> = cells
        .par_iter()
        .map(|&c| {
            let d = grid_dijkstra(grid, c)?;
            Ok(cells.iter().map(|o| d[grid.spec.linear(o.0, o.1)]).collect())
        })
        .collect::<Result<_, NavError>>()?;
    let res = grid.spec.resolution;
    Ok(rows
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            row.into_iter()
                .enumerate()
                .map(|(j, c)| if i == j { 0.0 } else { c.map_or(f64::INFINITY, |c| c.value() * res) })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmodel::GridSpec2;

    fn grid(w: usize, h: usize) -> OccupancyGrid<f64> {
        OccupancyGrid::free(GridSpec2 { origin: [0.0, 0.0], resolution: 1.0, width: w, height: h })
    }

    #[test]
    fn exact_ordering() {
        let a = OctileCost { straight: 3, diagonal: 0 };
        let b = OctileCost { straight: 0, diagonal: 2 };
        assert!(b < a);
        let c = OctileCost { straight: 0, diagonal: 3 };
        assert!(a < c);
        assert_eq!(a.cmp(&a), Ordering::Equal);
        assert!(OctileCost { straight: 1, diagonal: 1 } > OctileCost { straight: 2, diagonal: 0 });
    }

    #[test]
    fn diagonal_corner_to_corner() {
        let g = grid(5, 5);
        let p = grid_plan(&g, (0, 0), (4, 4)).unwrap();
        assert_eq!(p.exact_cost, OctileCost { straight: 0, diagonal: 4 });
        assert!((p.cost - 4.0 * 2f64.sqrt()).abs() < 1e-12);
        let d = grid_dijkstra(&g, (0, 0)).unwrap();
        assert_eq!(d[g.spec.linear(4, 4)], Some(p.exact_cost));
    }

    #[test]
    fn trivial_and_blocked() {
        let mut g = grid(5, 5);
        let p = grid_plan(&g, (2, 2), (2, 2)).unwrap();
        assert_eq!(p.cells, vec![(2, 2)]);
        assert_eq!(p.cost, 0.0);
        for j in 0..5 {
            g.set(2, j, true);
        }
        assert!(matches!(grid_plan(&g, (0, 0), (4, 4)), Err(NavError::NoPath)));
        assert!(matches!(grid_plan(&g, (2, 0), (4, 4)), Err(NavError::InvalidEndpoint(_))));
    }

    #[test]
    fn pairwise_symmetric_with_island() {
        let mut g = grid(10, 10);
        for k in 0..10 {
            g.set(6, k, true);
        }
        let poses = [BasePose::new(0.5, 0.5, 0.0), BasePose::new(4.5, 8.5, 0.0), BasePose::new(8.5, 2.5, 0.0)];
        let m = pairwise_costs(&g, &poses).unwrap();
        for i in 0..3 {
            assert_eq!(m[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(m[i][j], m[j][i]);
            }
        }
        assert!((m[0][1] - (4.0 * 2f64.sqrt() + 4.0)).abs() < 1e-12);
        assert!(m[2][0].is_infinite() && m[2][1].is_infinite());
    }
}
