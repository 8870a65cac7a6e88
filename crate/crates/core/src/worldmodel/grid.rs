use serde::{Deserialize, Serialize};

use super::voxel::VoxelMap;
use super::WorldError;
use crate::scalar::Real;

/// Placement of a dense row-major 2D grid on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec2<T> {
    pub origin: [T; 2],
    pub resolution: T,
    pub width: usize,
    pub height: usize,
}

impl<T: Real> GridSpec2<T> {
    /// Smallest grid with cell size `resolution` covering `[lo, hi]`.
    pub fn covering(lo: [T; 2], hi: [T; 2], resolution: T) -> Self {
        let w = ((hi[0] - lo[0]) / resolution).ceil().to_usize().unwrap_or(0).max(1);
        let h = ((hi[1] - lo[1]) / resolution).ceil().to_usize().unwrap_or(0).max(1);
        Self { origin: lo, resolution, width: w, height: h }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_of(&self, x: T, y: T) -> Option<(usize, usize)> {
        let i = ((x - self.origin[0]) / self.resolution).floor();
        let j = ((y - self.origin[1]) / self.resolution).floor();
        if i < T::zero() || j < T::zero() {
            return None;
        }
        let (i, j) = (i.to_usize()?, j.to_usize()?);
        (i < self.width && j < self.height).then_some((i, j))
    }

    pub fn center(&self, i: usize, j: usize) -> [T; 2] {
        let half = T::lit(0.5);
        [
            self.origin[0] + (T::from_usize(i).unwrap() + half) * self.resolution,
            self.origin[1] + (T::from_usize(j).unwrap() + half) * self.resolution,
        ]
    }

    pub fn linear(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }
}

/// Per-column maximum height map. `None` marks columns without occupied voxels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElevationGrid<T> {
    pub spec: GridSpec2<T>,
    pub heights: Vec<Option<T>>,
}

impl<T: Real> ElevationGrid<T> {
    pub fn height(&self, i: usize, j: usize) -> Option<T> {
        self.heights[self.spec.linear(i, j)]
    }
}

/// Binary free/occupied grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid<T> {
    pub spec: GridSpec2<T>,
    pub occupied: Vec<bool>,
}

impl<T: Real> OccupancyGrid<T> {
    pub fn free(spec: GridSpec2<T>) -> Self {
        Self { occupied: vec![false; spec.len()], spec }
    }

    pub fn is_occupied(&self, i: usize, j: usize) -> bool {
        self.occupied[self.spec.linear(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, occ: bool) {
        let k = self.spec.linear(i, j);
        self.occupied[k] = occ;
    }

    /// Occupancy at a metric position; everything outside the grid counts as occupied.
    pub fn is_occupied_at(&self, x: T, y: T) -> bool {
        match self.spec.cell_of(x, y) {
            Some((i, j)) => self.is_occupied(i, j),
            None => true,
        }
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|o| **o).count()
    }
}

/// Elevation over the xy-bounding box of the occupied voxels.
pub fn derive_elevation<T: Real>(
    map: &VoxelMap<T>,
    z_min: T,
    z_max: T,
    cell_res: T,
    min_count: u64,
) -> Result<ElevationGrid<T>, WorldError> {
    if !(z_min < z_max) {
        return Err(WorldError::InvalidRange);
    }
    let res = map.resolution();
    let mut lo = [T::infinity(); 2];
    let mut hi = [T::neg_infinity(); 2];
    for idx in map.occupied(min_count) {
        let c = map.voxel_center(idx);
        lo = [lo[0].min(c.x - res / T::lit(2.0)), lo[1].min(c.y - res / T::lit(2.0))];
        hi = [hi[0].max(c.x + res / T::lit(2.0)), hi[1].max(c.y + res / T::lit(2.0))];
    }
    if lo[0] > hi[0] {
        lo = [map.origin().x, map.origin().y];
        hi = lo;
    }
    derive_elevation_in(map, z_min, z_max, GridSpec2::covering(lo, hi, cell_res), min_count)
}

/// Elevation on a caller-chosen grid. A voxel contributes to the column that
/// contains its center if its center height lies in `[z_min, z_max]`; the
/// recorded height is the voxel's top face.
pub fn derive_elevation_in<T: Real>(
    map: &VoxelMap<T>,
    z_min: T,
    z_max: T,
    spec: GridSpec2<T>,
    min_count: u64,
) -> Result<ElevationGrid<T>, WorldError> {
    if !(z_min < z_max) {
        return Err(WorldError::InvalidRange);
    }
    if !(spec.resolution > T::zero()) {
        return Err(WorldError::InvalidResolution(spec.resolution.to_f64_lossy()));
    }
    let mut heights: Vec<Option<T>> = vec![None; spec.len()];
    let res = map.resolution();
    for idx in map.occupied(min_count) {
        let c = map.voxel_center(idx);
        if c.z < z_min || c.z > z_max {
            continue;
        }
        let Some((i, j)) = spec.cell_of(c.x, c.y) else { continue };
        let top = map.origin().z + T::from_i32(idx.0[2] + 1).unwrap() * res;
        let h = &mut heights[spec.linear(i, j)];
        *h = Some(h.map_or(top, |v| v.max(top)));
    }
    Ok(ElevationGrid { spec, heights })
}

/// Cell offsets within Euclidean distance `radius` of the origin cell.
pub fn disk_offsets<T: Real>(radius: T, resolution: T) -> Vec<(isize, isize)> {
    let r_cells = (radius / resolution).floor().to_isize().unwrap_or(0);
    let limit = radius + T::lit(1e-9);
    let mut out = Vec::new();
    for dj in -r_cells..=r_cells {
        for di in -r_cells..=r_cells {
            let d = (T::from_isize(di * di + dj * dj).unwrap()).sqrt() * resolution;
            if d <= limit {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Dilates the cells whose height exceeds `obstacle_height` by `robot_radius`.
pub fn inflate<T: Real>(elev: &ElevationGrid<T>, obstacle_height: T, robot_radius: T) -> OccupancyGrid<T> {
    let spec = elev.spec;
    let mut grid = OccupancyGrid::free(spec);
    let offsets = disk_offsets(robot_radius.max(T::zero()), spec.resolution);
    for j in 0..spec.height {
        for i in 0..spec.width {
            if !elev.height(i, j).is_some_and(|h| h > obstacle_height) {
                continue;
            }
            for &(di, dj) in &offsets {
                let (ni, nj) = (i as isize + di, j as isize + dj);
                if ni >= 0 && nj >= 0 && (ni as usize) < spec.width && (nj as usize) < spec.height {
                    grid.set(ni as usize, nj as usize, true);
                }
            }
        }
    }
    grid
}
