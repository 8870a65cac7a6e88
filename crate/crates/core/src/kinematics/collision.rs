use std::collections::BTreeSet;

use super::fk::Kinematics;
use super::model::RobotModel;
use super::KinematicsError;
use crate::geometry::Vec3;
use crate::scalar::Real;
use crate::worldmodel::{voxel_center, voxel_index_of, VoxelIndex};

/// A collision sphere placed in the world.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedSphere<T> {
    pub link: usize,
    pub center: Vec3<T>,
    pub radius: T,
}

/// Calls `visit` for every voxel claimed by a sphere under the conservative
/// rule: the voxel center lies within `radius + half voxel diagonal` of the
/// sphere center.
pub fn sphere_voxels<T: Real>(center: Vec3<T>, radius: T, origin: Vec3<T>, resolution: T, mut visit: impl FnMut(VoxelIndex)) {
    sphere_voxels_until(center, radius, origin, resolution, |v| {
        visit(v);
        false
    });
}

/// Same voxel walk as [`sphere_voxels`], stopping at the first voxel for which
/// `stop` returns true. Returns whether it stopped early.
pub fn sphere_voxels_until<T: Real>(center: Vec3<T>, radius: T, origin: Vec3<T>, resolution: T, mut stop: impl FnMut(VoxelIndex) -> bool) -> bool {
    let reach = radius + resolution * T::lit(3f64.sqrt() / 2.0);
    let r = Vec3::new(reach, reach, reach);
    let lo = voxel_index_of(origin, resolution, center - r);
    let hi = voxel_index_of(origin, resolution, center + r);
    let reach2 = reach * reach;
    for i in lo.0[0]..=hi.0[0] {
        for j in lo.0[1]..=hi.0[1] {
            for k in lo.0[2]..=hi.0[2] {
                let idx = VoxelIndex([i, j, k]);
                if (voxel_center(origin, resolution, idx) - center).norm_squared() <= reach2 && stop(idx) {
                    return true;
                }
            }
        }
    }
    false
}

impl<T: Real> RobotModel<T> {
    pub fn placed_spheres(&self, kin: &Kinematics<T>) -> Vec<PlacedSphere<T>> {
        self.spheres()
            .iter()
            .map(|s| PlacedSphere {
                link: s.link,
                center: kin.link_poses[s.link].transform_point(s.center),
                radius: s.radius,
            })
            .collect()
    }

    /// Voxels (grid anchored at `origin`) touched by the collision geometry at `q`.
    pub fn robot_voxels(&self, q: &[T], origin: Vec3<T>, resolution: T) -> Result<BTreeSet<VoxelIndex>, KinematicsError> {
        let kin = self.forward_kinematics(q)?;
        let mut out = BTreeSet::new();
        for s in self.placed_spheres(&kin) {
            sphere_voxels(s.center, s.radius, origin, resolution, |v| {
                out.insert(v);
            });
        }
        Ok(out)
    }

    /// True iff two spheres on non-adjacent links overlap.
    pub fn self_collision(&self, q: &[T]) -> Result<bool, KinematicsError> {
        let kin = self.forward_kinematics(q)?;
        Ok(spheres_self_collide(&self.placed_spheres(&kin)))
    }
}

pub fn spheres_self_collide<T: Real>(spheres: &[PlacedSphere<T>]) -> bool {
    for (i, a) in spheres.iter().enumerate() {
        for b in &spheres[i + 1..] {
            if a.link.abs_diff(b.link) < 2 {
                continue;
            }
            let r = a.radius + b.radius;
            if (a.center - b.center).norm_squared() < r * r {
                return true;
            }
        }
    }
    false
}
