//! Procedural store layout used for campaigns and tests: parallel shelf rows
//! separated by aisles, items on every face and level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::store::{ItemAttributes, ItemId, ItemRecord, Shelf, StoreModel};
use crate::grasp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticStoreParams {
    pub rows: usize,
    pub units_per_row: usize,
    pub unit_length: f64,
    pub shelf_depth: f64,
    pub shelf_height: f64,
    pub aisle_width: f64,
    pub slot_spacing: f64,
    /// Item base heights, m.
    pub levels: Vec<f64>,
    /// How far behind the shelf face the item pose sits, m.
    pub item_inset: f64,
    pub out_of_stock_fraction: f64,
}

impl Default for SyntheticStoreParams {
    fn default() -> Self {
        Self {
            rows: 4,
            units_per_row: 6,
            unit_length: 2.0,
            shelf_depth: 0.5,
            shelf_height: 1.5,
            aisle_width: 2.0,
            slot_spacing: 0.4,
            levels: vec![0.3, 0.6, 0.9, 1.2],
            item_inset: 0.1,
            out_of_stock_fraction: 0.0,
        }
    }
}

const ROW_START_X: f64 = 2.0;
const FIRST_ROW_Y: f64 = 2.5;

pub fn synthetic_store(params: &SyntheticStoreParams, seed: u64) -> StoreModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shelves = Vec::new();
    let mut items = Vec::new();
    let row_len = params.unit_length * params.units_per_row as f64;
    let slots = (row_len / params.slot_spacing).floor() as usize;
    let mut next_id = 1u32;
    for r in 0..params.rows {
        let cy = FIRST_ROW_Y + r as f64 * (params.shelf_depth + params.aisle_width);
        for u in 0..params.units_per_row {
            let cx = ROW_START_X + (u as f64 + 0.5) * params.unit_length;
            shelves.push(Shelf {
                center: [cx, cy, params.shelf_height / 2.0],
                extents: [params.unit_length, params.shelf_depth, params.shelf_height],
                yaw: 0.0,
            });
        }
        for outward in [-1.0f64, 1.0] {
            let face_y = cy + outward * params.shelf_depth / 2.0;
            for &level in &params.levels {
                for s in 0..slots {
                    let x = ROW_START_X + (s as f64 + 0.5) * params.slot_spacing;
                    let y = face_y - outward * params.item_inset;
                    items.push(random_item(&mut rng, ItemId(next_id), [x, y, level], outward, params));
                    next_id += 1;
                }
            }
        }
    }
    let mut store = StoreModel { resolution: Some(0.05), shelves, items, start_pose: [1.0, 1.0, 0.0] };
    grasp::classify_catalog(&mut store);
    store
}

fn random_item(rng: &mut ChaCha8Rng, id: ItemId, at: [f64; 3], outward_y: f64, p: &SyntheticStoreParams) -> ItemRecord {
    let dims = [rng.random_range(0.06..0.2), rng.random_range(0.06..0.22), rng.random_range(0.08..0.26)];
    let deformable = rng.random_bool(0.15);
    let mut attributes = ItemAttributes {
        has_handle: rng.random_bool(0.08),
        has_cap: rng.random_bool(0.12),
        deformable,
        hangs_on_hook: rng.random_bool(0.05),
        in_box: rng.random_bool(0.08),
        rigid_packaging: !deformable && rng.random_bool(0.7),
        glass: rng.random_bool(0.04),
        refrigerated: false,
        produce: false,
    };
    if attributes.hangs_on_hook {
        attributes.in_box = false;
    }
    let mass = if rng.random_bool(0.03) {
        rng.random_range(4.6..8.0)
    } else if deformable && rng.random_bool(0.4) {
        rng.random_range(1.6..4.0)
    } else if attributes.has_handle {
        rng.random_range(0.8..3.5)
    } else {
        rng.random_range(0.05..1.5)
    };
    let in_stock = if rng.random_bool(p.out_of_stock_fraction.clamp(0.0, 1.0)) { 0 } else { rng.random_range(2..=6) };
    let yaw = if outward_y > 0.0 { std::f64::consts::FRAC_PI_2 } else { -std::f64::consts::FRAC_PI_2 };
    ItemRecord {
        id,
        handle_anchor: attributes.has_handle.then_some([0.0, 0.0, 0.8 * dims[2]]),
        dims,
        mass,
        pose: [at[0], at[1], at[2], yaw],
        outward_axis: [0.0, outward_y],
        attributes,
        in_stock,
        grasp_type: None,
        extraction_type: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_store_is_valid_and_large() {
        let s = synthetic_store(&SyntheticStoreParams::default(), 3);
        s.validate().unwrap();
        assert!(s.items.len() >= 900 && s.items.len() <= 1100, "{}", s.items.len());
        assert!(s.items.iter().all(|i| i.grasp_type.is_some() && i.extraction_type.is_some()));
        assert_eq!(s, synthetic_store(&SyntheticStoreParams::default(), 3));
    }
}
