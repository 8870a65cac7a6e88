use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::voxel::VoxelMap;
use super::WorldError;
use crate::geometry::{Isometry, Mat3, Vec3};
use crate::grasp::{ExtractionType, GraspType};

/// Heaviest item that may appear on a shopping list, kg.
pub const MAX_LIST_ITEM_MASS: f64 = 4.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(pub u32);

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Shelf unit: a box with full `extents`, centered at `center`, rotated by `yaw`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shelf {
    pub center: [f64; 3],
    pub extents: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
}

impl Shelf {
    pub fn pose(&self) -> Isometry<f64> {
        Isometry::from_xyz_yaw(self.center[0], self.center[1], self.center[2], self.yaw)
    }

    fn to_local(&self, p: Vec3<f64>) -> Vec3<f64> {
        self.pose().inverse().transform_point(p)
    }

    pub fn contains(&self, p: Vec3<f64>) -> bool {
        let l = self.to_local(p);
        (0..3).all(|k| l[k].abs() <= self.extents[k] / 2.0 + 1e-9)
    }

    /// Distance from `p` (inside or in front of the shelf) to the shelf boundary,
    /// travelling along the planar direction `dir`.
    pub fn exit_distance(&self, p: Vec3<f64>, dir: [f64; 2]) -> f64 {
        let l = self.to_local(p);
        let d = Mat3::rot_z(-self.yaw).mul_vec(Vec3::new(dir[0], dir[1], 0.0));
        let mut t = f64::INFINITY;
        for k in 0..2 {
            let half = self.extents[k] / 2.0;
            if d[k] > 1e-12 {
                t = t.min((half - l[k]) / d[k]);
            } else if d[k] < -1e-12 {
                t = t.min((-half - l[k]) / d[k]);
            }
        }
        t.max(0.0)
    }

    /// Axis-aligned bounding box of the (possibly rotated) shelf.
    pub fn aabb(&self) -> (Vec3<f64>, Vec3<f64>) {
        let pose = self.pose();
        let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut hi = -lo;
        for sx in [-0.5, 0.5] {
            for sy in [-0.5, 0.5] {
                for sz in [-0.5, 0.5] {
                    let c = pose.transform_point(Vec3::new(
                        sx * self.extents[0],
                        sy * self.extents[1],
                        sz * self.extents[2],
                    ));
                    lo = Vec3::new(lo.x.min(c.x), lo.y.min(c.y), lo.z.min(c.z));
                    hi = Vec3::new(hi.x.max(c.x), hi.y.max(c.y), hi.z.max(c.z));
                }
            }
        }
        (lo, hi)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ItemAttributes {
    pub has_handle: bool,
    pub has_cap: bool,
    pub deformable: bool,
    pub hangs_on_hook: bool,
    pub in_box: bool,
    pub rigid_packaging: bool,
    pub glass: bool,
    pub refrigerated: bool,
    pub produce: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub id: ItemId,
    /// Full extents along the item frame axes, m.
    pub dims: [f64; 3],
    pub mass: f64,
    /// Bottom-face center `[x, y, z]` and heading, store frame.
    pub pose: [f64; 4],
    pub outward_axis: [f64; 2],
    #[serde(default)]
    pub attributes: ItemAttributes,
    pub in_stock: u32,
    /// Handle center in the item frame.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handle_anchor: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grasp_type: Option<GraspType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_type: Option<ExtractionType>,
}

impl ItemRecord {
    pub fn frame(&self) -> Isometry<f64> {
        Isometry::from_xyz_yaw(self.pose[0], self.pose[1], self.pose[2], self.pose[3])
    }

    pub fn position(&self) -> Vec3<f64> {
        Vec3::new(self.pose[0], self.pose[1], self.pose[2])
    }

    pub fn center(&self) -> Vec3<f64> {
        self.frame().transform_point(Vec3::new(0.0, 0.0, self.dims[2] / 2.0))
    }

    pub fn weight_newton(&self) -> f64 {
        self.mass * 9.81
    }

    pub fn is_excluded_category(&self) -> bool {
        self.attributes.glass || self.attributes.refrigerated || self.attributes.produce
    }

    /// May this item be requested on a shopping list.
    pub fn is_list_eligible(&self) -> bool {
        self.mass <= MAX_LIST_ITEM_MASS && !self.is_excluded_category()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreModel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution: Option<f64>,
    pub shelves: Vec<Shelf>,
    pub items: Vec<ItemRecord>,
    pub start_pose: [f64; 3],
}

impl StoreModel {
    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let store: StoreModel = serde_json::from_str(text).map_err(|e| WorldError::InvalidStore(e.to_string()))?;
        store.validate()?;
        Ok(store)
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path).map_err(|e| WorldError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("store serializes")
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        let mut ids = BTreeSet::new();
        for shelf in &self.shelves {
            if shelf.extents.iter().any(|e| !(*e > 0.0)) {
                return Err(WorldError::InvalidStore("shelf extents must be positive".into()));
            }
        }
        for item in &self.items {
            if !ids.insert(item.id) {
                return Err(WorldError::InvalidStore(format!("duplicate item id {}", item.id)));
            }
            let n = item.outward_axis[0].hypot(item.outward_axis[1]);
            if (n - 1.0).abs() > 1e-9 {
                return Err(WorldError::InvalidStore(format!("item {} outward_axis not unit ({n})", item.id)));
            }
            if item.dims.iter().any(|d| !(*d > 0.0)) || !(item.mass > 0.0) {
                return Err(WorldError::InvalidStore(format!("item {} has non-positive dims or mass", item.id)));
            }
            let inside = self.shelves.iter().filter(|s| s.contains(item.position())).count();
            if inside != 1 {
                return Err(WorldError::InvalidStore(format!(
                    "item {} lies inside {inside} shelves (expected exactly one)",
                    item.id
                )));
            }
        }
        Ok(())
    }

    pub fn item(&self, id: ItemId) -> Option<&ItemRecord> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn shelf_of(&self, item: &ItemRecord) -> Option<&Shelf> {
        self.shelves.iter().find(|s| s.contains(item.position()))
    }

    /// Ground-plane rectangle containing all shelves and the start pose, padded by `margin`.
    pub fn floor_bounds(&self, margin: f64) -> ([f64; 2], [f64; 2]) {
        let mut lo = [self.start_pose[0], self.start_pose[1]];
        let mut hi = lo;
        for s in &self.shelves {
            let (a, b) = s.aabb();
            lo = [lo[0].min(a.x), lo[1].min(a.y)];
            hi = [hi[0].max(b.x), hi[1].max(b.y)];
        }
        ([lo[0] - margin, lo[1] - margin], [hi[0] + margin, hi[1] + margin])
    }

    /// Voxelizes the shelf volumes (voxel centers inside a shelf are marked).
    pub fn to_voxel_map(&self, resolution: f64) -> Result<VoxelMap<f64>, WorldError> {
        let mut map = VoxelMap::new(resolution, Vec3::zeros())?;
        for s in &self.shelves {
            voxelize_shelf(&mut map, s, &Isometry::identity());
        }
        Ok(map)
    }
}

/// Marks voxels of `map` whose centers fall inside `shelf`, where `map` lives in
/// a frame related to the store frame by `store_to_map`.
pub fn voxelize_shelf(map: &mut VoxelMap<f64>, shelf: &Shelf, store_to_map: &Isometry<f64>) {
    let in_map = store_to_map.compose(&shelf.pose());
    let inv = in_map.inverse();
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = -lo;
    for sx in [-0.5, 0.5] {
        for sy in [-0.5, 0.5] {
            for sz in [-0.5, 0.5] {
                let c = in_map.transform_point(Vec3::new(sx * shelf.extents[0], sy * shelf.extents[1], sz * shelf.extents[2]));
                lo = Vec3::new(lo.x.min(c.x), lo.y.min(c.y), lo.z.min(c.z));
                hi = Vec3::new(hi.x.max(c.x), hi.y.max(c.y), hi.z.max(c.z));
            }
        }
    }
    voxelize_where(map, lo, hi, |c| {
        let l = inv.transform_point(c);
        (0..3).all(|k| l[k].abs() <= shelf.extents[k] / 2.0)
    });
}

/// Marks voxels with centers in `[lo, hi]` that satisfy `inside`.
pub fn voxelize_where(map: &mut VoxelMap<f64>, lo: Vec3<f64>, hi: Vec3<f64>, inside: impl Fn(Vec3<f64>) -> bool) {
    let a = map.index_of(lo);
    let b = map.index_of(hi);
    for i in a.0[0]..=b.0[0] {
        for j in a.0[1]..=b.0[1] {
            for k in a.0[2]..=b.0[2] {
                let idx = super::VoxelIndex([i, j, k]);
                if inside(map.voxel_center(idx)) && !map.is_occupied(idx, 1) {
                    map.mark(idx);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_store() -> StoreModel {
        StoreModel {
            resolution: None,
            shelves: vec![Shelf { center: [2.0, 2.0, 0.75], extents: [2.0, 0.5, 1.5], yaw: 0.0 }],
            items: vec![ItemRecord {
                id: ItemId(1),
                dims: [0.1, 0.1, 0.2],
                mass: 0.5,
                pose: [2.0, 1.85, 0.5, 0.0],
                outward_axis: [0.0, -1.0],
                attributes: ItemAttributes::default(),
                in_stock: 3,
                handle_anchor: None,
                grasp_type: None,
                extraction_type: None,
            }],
            start_pose: [0.0, 0.0, 0.0],
        }
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = tiny_store();
        let back = StoreModel::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);

        let mut bad = s.clone();
        bad.items[0].pose[1] = 0.5;
        assert!(bad.validate().is_err());

        let mut dup = s.clone();
        dup.items.push(dup.items[0].clone());
        dup.items[1].pose[0] = 2.5;
        assert!(dup.validate().is_err());

        let mut axis = s;
        axis.items[0].outward_axis = [0.0, -0.9];
        assert!(axis.validate().is_err());
    }

    #[test]
    fn parses_documented_schema() {
        let text = r#"{
            "shelves": [{"center": [0, 0, 0.5], "extents": [1, 1, 1]}],
            "items": [{"id": 7, "dims": [0.1, 0.1, 0.1], "mass": 1.0, "pose": [0, 0, 0.2, 0],
                       "outward_axis": [1, 0], "attributes": {"has_cap": true}, "in_stock": 2}],
            "start_pose": [3, 0, 0]
        }"#;
        let s = StoreModel::from_json(text).unwrap();
        assert!(s.items[0].attributes.has_cap);
        assert_eq!(s.item(ItemId(7)).unwrap().in_stock, 2);
    }

    #[test]
    fn exit_distance_along_outward_axis() {
        let s = tiny_store();
        let d = s.shelves[0].exit_distance(Vec3::new(2.0, 1.85, 0.5), [0.0, -1.0]);
        assert!((d - 0.1).abs() < 1e-12);
    }

    #[test]
    fn voxelized_shelf_has_expected_volume() {
        let s = tiny_store();
        let m = s.to_voxel_map(0.05).unwrap();
        assert_eq!(m.len(), 40 * 10 * 30);
    }

    #[test]
    fn eligibility() {
        let mut it = tiny_store().items[0].clone();
        assert!(it.is_list_eligible());
        it.mass = 4.6;
        assert!(!it.is_list_eligible());
        it.mass = 1.0;
        it.attributes.glass = true;
        assert!(!it.is_list_eligible());
    }
}
