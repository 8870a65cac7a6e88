use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::WorldError;
use crate::geometry::{Mat3, Vec3};
use crate::scalar::Real;

/// Integer voxel coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VoxelIndex(pub [i32; 3]);

impl VoxelIndex {
    pub const fn new(x: i32, y: i32, z: i32) -> Self {
        Self([x, y, z])
    }

    pub fn offset(self, d: [i32; 3]) -> Self {
        Self([self.0[0] + d[0], self.0[1] + d[1], self.0[2] + d[2]])
    }
}

/// Center of voxel `idx` in a grid anchored at `origin`. Every component that
/// needs voxel centers goes through this function so that collision decisions
/// made by different routes agree bit for bit.
pub fn voxel_center<T: Real>(origin: Vec3<T>, resolution: T, idx: VoxelIndex) -> Vec3<T> {
    let half = T::lit(0.5);
    let c = |i: i32, o: T| o + (T::from_i32(i).unwrap() + half) * resolution;
    Vec3::new(c(idx.0[0], origin.x), c(idx.0[1], origin.y), c(idx.0[2], origin.z))
}

/// Index of the voxel containing `p`.
pub fn voxel_index_of<T: Real>(origin: Vec3<T>, resolution: T, p: Vec3<T>) -> VoxelIndex {
    let f = |v: T, o: T| ((v - o) / resolution).floor().to_i32().unwrap_or(i32::MAX);
    VoxelIndex([f(p.x, origin.x), f(p.y, origin.y), f(p.z, origin.z)])
}

/// Running statistics of the points that fell into one voxel.
///
/// Mean and co-moment are updated with Welford's recurrence; the raw second
/// moment `E[p p^T]` is derived on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelCell<T> {
    pub count: u64,
    pub mean: Vec3<T>,
    scatter: Mat3<T>,
    pub mean_color: [T; 3],
}

impl<T: Real> VoxelCell<T> {
    fn empty() -> Self {
        Self { count: 0, mean: Vec3::zeros(), scatter: Mat3::zeros(), mean_color: [T::zero(); 3] }
    }

    fn push(&mut self, p: Vec3<T>, rgb: [T; 3]) {
        self.count += 1;
        let n = T::from_u64(self.count).expect("count fits scalar");
        let delta = p - self.mean;
        self.mean += delta * (T::one() / n);
        let delta_after = p - self.mean;
        self.scatter = self.scatter.add(&delta.outer(delta_after));
        for (c, v) in self.mean_color.iter_mut().zip(rgb) {
            *c += (v - *c) / n;
        }
    }

    /// Population covariance of the inserted points.
    pub fn covariance(&self) -> Mat3<T> {
        let n = T::from_u64(self.count).expect("count fits scalar");
        // symmetrize away the asymmetric rounding of the outer-product update
        let s = self.scatter.add(&self.scatter.transpose()).scale(T::lit(0.5));
        s.scale(T::one() / n)
    }

    /// Raw second moment `E[p p^T]`.
    pub fn second_moment(&self) -> Mat3<T> {
        self.covariance().add(&self.mean.outer(self.mean))
    }
}

/// Sparse voxel grid with per-cell point statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoxelMap<T> {
    resolution: T,
    origin: Vec3<T>,
    cells: BTreeMap<VoxelIndex, VoxelCell<T>>,
}

impl<T: Real> VoxelMap<T> {
    pub fn new(resolution: T, origin: Vec3<T>) -> Result<Self, WorldError> {
        if !(resolution > T::zero()) || !resolution.is_finite() {
            return Err(WorldError::InvalidResolution(resolution.to_f64_lossy()));
        }
        if !origin.is_finite() {
            return Err(WorldError::InvalidPoint);
        }
        Ok(Self { resolution, origin, cells: BTreeMap::new() })
    }

    pub fn resolution(&self) -> T {
        self.resolution
    }

    pub fn origin(&self) -> Vec3<T> {
        self.origin
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn index_of(&self, p: Vec3<T>) -> VoxelIndex {
        voxel_index_of(self.origin, self.resolution, p)
    }

    pub fn voxel_center(&self, idx: VoxelIndex) -> Vec3<T> {
        voxel_center(self.origin, self.resolution, idx)
    }

    /// Accumulates a batch of colored points. The batch is validated first, so a
    /// rejected batch leaves the map untouched.
    pub fn insert(&mut self, points: &[(Vec3<T>, [T; 3])]) -> Result<(), WorldError> {
        if points.iter().any(|(p, c)| !p.is_finite() || c.iter().any(|v| !v.is_finite())) {
            return Err(WorldError::InvalidPoint);
        }
        for &(p, rgb) in points {
            let idx = self.index_of(p);
            self.cells.entry(idx).or_insert_with(VoxelCell::empty).push(p, rgb);
        }
        Ok(())
    }

    pub fn insert_point(&mut self, p: Vec3<T>) -> Result<(), WorldError> {
        self.insert(&[(p, [T::zero(); 3])])
    }

    pub fn cell(&self, idx: VoxelIndex) -> Option<&VoxelCell<T>> {
        self.cells.get(&idx)
    }

    pub fn is_occupied(&self, idx: VoxelIndex, min_count: u64) -> bool {
        self.cells.get(&idx).is_some_and(|c| c.count >= min_count)
    }

    pub fn cells(&self) -> impl Iterator<Item = (VoxelIndex, &VoxelCell<T>)> {
        self.cells.iter().map(|(k, v)| (*k, v))
    }

    /// Indices of cells holding at least `min_count` points, in ascending order.
    pub fn occupied(&self, min_count: u64) -> impl Iterator<Item = VoxelIndex> + '_ {
        self.cells.iter().filter(move |(_, c)| c.count >= min_count).map(|(k, _)| *k)
    }

    /// Marks every voxel whose center lies inside the axis-aligned box `[lo, hi]`
    /// by inserting the voxel center.
    pub fn fill_box(&mut self, lo: Vec3<T>, hi: Vec3<T>) -> Result<(), WorldError> {
        let a = self.index_of(lo);
        let b = self.index_of(hi);
        let mut pts = Vec::new();
        for i in a.0[0]..=b.0[0] {
            for j in a.0[1]..=b.0[1] {
                for k in a.0[2]..=b.0[2] {
                    let c = self.voxel_center(VoxelIndex([i, j, k]));
                    if c.x >= lo.x && c.x <= hi.x && c.y >= lo.y && c.y <= hi.y && c.z >= lo.z && c.z <= hi.z {
                        pts.push((c, [T::zero(); 3]));
                    }
                }
            }
        }
        self.insert(&pts)
    }

    /// Marks the voxels `idx` directly.
    pub fn mark(&mut self, idx: VoxelIndex) {
        let c = self.voxel_center(idx);
        self.cells.entry(idx).or_insert_with(VoxelCell::empty).push(c, [T::zero(); 3]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map() -> VoxelMap<f64> {
        VoxelMap::new(0.1, Vec3::zeros()).unwrap()
    }

    #[test]
    fn single_point_binning() {
        let mut m = map();
        m.insert_point(Vec3::new(0.05, 0.05, 0.05)).unwrap();
        let c = m.cell(VoxelIndex::new(0, 0, 0)).unwrap();
        assert_eq!(c.count, 1);
        assert!((c.mean - Vec3::new(0.05, 0.05, 0.05)).norm() < 1e-15);
    }

    #[test]
    fn two_point_mean() {
        let mut m = map();
        m.insert_point(Vec3::new(0.0, 0.0, 0.02)).unwrap();
        m.insert_point(Vec3::new(0.02, 0.0, 0.0)).unwrap();
        let c = m.cell(VoxelIndex::new(0, 0, 0)).unwrap();
        assert_eq!(c.count, 2);
        assert!((c.mean - Vec3::new(0.01, 0.0, 0.01)).norm() < 1e-15);
    }

    #[test]
    fn occupancy_threshold() {
        let mut m = map();
        assert!(!m.is_occupied(VoxelIndex::new(0, 0, 0), 1));
        assert!(!m.is_occupied(VoxelIndex::new(-4, 2, 9), 0));
        m.insert_point(Vec3::new(0.05, 0.05, 0.05)).unwrap();
        assert!(m.is_occupied(VoxelIndex::new(0, 0, 0), 1));
        assert!(!m.is_occupied(VoxelIndex::new(0, 0, 0), 2));
    }

    #[test]
    fn rejects_non_finite_batch_atomically() {
        let mut m = map();
        let err = m
            .insert(&[(Vec3::new(0.1, 0.1, 0.1), [0.0; 3]), (Vec3::new(f64::NAN, 0.0, 0.0), [0.0; 3])])
            .unwrap_err();
        assert!(matches!(err, WorldError::InvalidPoint));
        assert!(m.is_empty());
        assert!(VoxelMap::<f64>::new(0.0, Vec3::zeros()).is_err());
    }

    #[test]
    fn negative_coordinates_floor() {
        let m = map();
        assert_eq!(m.index_of(Vec3::new(-0.01, 0.0, 0.19)), VoxelIndex::new(-1, 0, 1));
    }

    #[test]
    fn color_mean() {
        let mut m = map();
        m.insert(&[(Vec3::new(0.01, 0.01, 0.01), [1.0, 0.0, 0.5]), (Vec3::new(0.02, 0.02, 0.02), [0.0, 1.0, 0.5])])
            .unwrap();
        let c = m.cell(VoxelIndex::new(0, 0, 0)).unwrap();
        assert_eq!(c.mean_color, [0.5, 0.5, 0.5]);
    }

    #[test]
    fn statistics_match_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Vec3<f64>> = (0..1000).map(|_| Vec3::new(rng.random(), rng.random(), rng.random())).collect();
        let mut m = map();
        m.insert(&pts.iter().map(|p| (*p, [0.0; 3])).collect::<Vec<_>>()).unwrap();
        let mut groups: BTreeMap<VoxelIndex, Vec<Vec3<f64>>> = BTreeMap::new();
        for p in &pts {
            groups.entry(m.index_of(*p)).or_default().push(*p);
        }
        assert_eq!(groups.len(), m.len());
        for (idx, g) in groups {
            let c = m.cell(idx).unwrap();
            let n = g.len() as f64;
            let mean = g.iter().fold(Vec3::zeros(), |a, p| a + *p) * (1.0 / n);
            let sm = g.iter().fold(Mat3::zeros(), |a, p| a.add(&p.outer(*p))).scale(1.0 / n);
            assert_eq!(c.count, g.len() as u64);
            assert!((c.mean - mean).norm() < 1e-9);
            assert!(c.second_moment().max_abs_diff(&sm) < 1e-9);
        }
    }

    #[test]
    fn works_in_single_precision() {
        let mut m = VoxelMap::<f32>::new(0.1, Vec3::zeros()).unwrap();
        m.insert_point(Vec3::new(0.05, 0.05, 0.05)).unwrap();
        assert!(m.is_occupied(VoxelIndex::new(0, 0, 0), 1));
    }
}
