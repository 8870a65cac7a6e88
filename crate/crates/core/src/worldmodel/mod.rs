//! Voxel world, ground-plane grids, the store catalog and shopping lists.

mod grid;
mod shopping;
mod store;
pub mod synthetic;
mod voxel;

pub use grid::{derive_elevation, derive_elevation_in, disk_offsets, inflate, ElevationGrid, GridSpec2, OccupancyGrid};
pub use shopping::{generate_shopping_list, ListEntry, ShoppingList, LIST_LENGTH, MAX_INSTANCES};
pub use store::{
    voxelize_shelf, voxelize_where, ItemAttributes, ItemId, ItemRecord, Shelf, StoreModel, MAX_LIST_ITEM_MASS,
};
pub use voxel::{voxel_center, voxel_index_of, VoxelCell, VoxelIndex, VoxelMap};

#[derive(Debug, thiserror::Error)]
pub enum WorldError {
    #[error("point has non-finite coordinates")]
    InvalidPoint,
    #[error("invalid resolution {0}")]
    InvalidResolution(f64),
    #[error("z_min must be strictly below z_max")]
    InvalidRange,
    #[error("catalog has {eligible} eligible items, {required} required")]
    InsufficientCatalog { eligible: usize, required: usize },
    #[error("invalid store: {0}")]
    InvalidStore(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
