use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use shopbot_core::drm::{self, CollisionMap, Roadmap, RoadmapParams};
use shopbot_core::geometry::Vec3;
use shopbot_core::kinematics::{presets, RobotFile};
use shopbot_core::worldmodel::synthetic::{synthetic_store, SyntheticStoreParams};
use shopbot_core::worldmodel::StoreModel;
use shopbot_core::RobotModel;

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Preset {
    DeskArm,
    Planar2r,
    WholeBody,
}

pub fn require_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        bail!("{}: file not found", path.display());
    }
    Ok(())
}

pub fn load_robot(path: &Path) -> anyhow::Result<RobotModel> {
    require_file(path)?;
    let file = RobotFile::load(path).with_context(|| format!("loading robot {}", path.display()))?;
    file.build().with_context(|| format!("building robot {}", path.display()))
}

pub fn load_roadmap(path: &Path, model: &RobotModel) -> anyhow::Result<(Roadmap, CollisionMap)> {
    require_file(path)?;
    drm::io::load(path, model).with_context(|| format!("loading roadmap {}", path.display()))
}

pub fn load_store(path: &Path) -> anyhow::Result<StoreModel> {
    require_file(path)?;
    StoreModel::load(path).with_context(|| format!("loading store {}", path.display()))
}

pub fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn build_roadmap(
    robot: &Path,
    nodes: usize,
    neighbors: usize,
    seed: u64,
    out: &Path,
    resolution: f64,
    edge_step: f64,
) -> anyhow::Result<()> {
    let model = load_robot(robot)?;
    let t = Instant::now();
    let roadmap = drm::build_roadmap(&model, &RoadmapParams { nodes, neighbors, seed, edge_step })?;
    let sampled = t.elapsed();
    let cmap = drm::build_collision_map(&roadmap, &model, Vec3::zeros(), resolution, edge_step)?;
    let total = t.elapsed();
    write_file(out, drm::io::encode(&roadmap, &cmap))?;
    let g = cmap.grid();
    println!("nodes          {}", roadmap.node_count());
    println!("edges          {}", roadmap.edge_count());
    println!("grid           {} x {} x {} voxels at {} m", g.dims[0], g.dims[1], g.dims[2], g.resolution);
    println!("list entries   {}", cmap.list_entry_count());
    println!("build time     {:.2} s (roadmap {:.2} s)", total.as_secs_f64(), sampled.as_secs_f64());
    println!("written        {}", out.display());
    Ok(())
}

pub fn generate_store(rows: usize, units: usize, seed: u64, out_of_stock: f64, out: &Path) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&out_of_stock) {
        bail!("--out-of-stock {out_of_stock} is outside [0, 1]");
    }
    let params = SyntheticStoreParams { rows, units_per_row: units, out_of_stock_fraction: out_of_stock, ..Default::default() };
    let store = synthetic_store(&params, seed);
    store.validate()?;
    write_file(out, store.to_json())?;
    println!("{} shelves, {} items written to {}", store.shelves.len(), store.items.len(), out.display());
    Ok(())
}

pub fn robot_preset(name: Preset, out: &Path) -> anyhow::Result<()> {
    let file = match name {
        Preset::DeskArm => presets::desk_arm(),
        Preset::Planar2r => presets::planar_2r(1.0, 1.0, 0.05),
        Preset::WholeBody => presets::whole_body(),
    };
    write_file(out, file.to_json() + "\n")
}
