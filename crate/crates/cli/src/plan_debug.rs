use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context};
use serde::Deserialize;
use shopbot_core::drm::{plan_to_pose, validate_path, DrmError, PathValidity, PlannerParams};
use shopbot_core::geometry::{Isometry, Mat3, Vec3};
use shopbot_core::VoxelMap;

use crate::artifacts::{load_roadmap, load_robot, require_file, write_file};

pub struct Query {
    pub robot: PathBuf,
    pub roadmap: PathBuf,
    pub world: PathBuf,
    pub start: String,
    pub target: String,
    pub seed: u64,
    pub params: Option<PathBuf>,
    pub export: Option<PathBuf>,
}

/// Obstacles in the robot base frame, voxelized on the roadmap's grid.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WorldFile {
    #[serde(default)]
    boxes: Vec<BoxSpec>,
    #[serde(default)]
    points: Vec<[f64; 3]>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxSpec {
    lo: [f64; 3],
    hi: [f64; 3],
}

fn parse_list(flag: &str, text: &str) -> anyhow::Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            let v: f64 = s.trim().parse().with_context(|| format!("--{flag}: '{s}' is not a number"))?;
            if !v.is_finite() {
                bail!("--{flag}: '{s}' is not finite");
            }
            Ok(v)
        })
        .collect()
}

fn parse_target(text: &str) -> anyhow::Result<(Isometry<f64>, bool)> {
    let v = parse_list("target", text)?;
    let t = Vec3::new(v[0], *v.get(1).unwrap_or(&0.0), *v.get(2).unwrap_or(&0.0));
    match v.len() {
        3 => Ok((Isometry::from_translation(t), true)),
        6 => Ok((Isometry::new(Mat3::from_rpy(v[3], v[4], v[5]), t), false)),
        n => bail!("--target takes 3 or 6 values, got {n}"),
    }
}

fn load_world(path: &Path, origin: Vec3<f64>, resolution: f64) -> anyhow::Result<VoxelMap> {
    require_file(path)?;
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: WorldFile = serde_json::from_str(&text).with_context(|| format!("invalid world file {}", path.display()))?;
    let mut map = VoxelMap::new(resolution, origin)?;
    for b in &spec.boxes {
        map.fill_box(Vec3::from_array(b.lo), Vec3::from_array(b.hi))?;
    }
    let pts: Vec<_> = spec.points.iter().map(|p| (Vec3::from_array(*p), [0.0; 3])).collect();
    map.insert(&pts)?;
    Ok(map)
}

fn fmt_q(q: &[f64]) -> String {
    q.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>().join(", ")
}

pub fn plan_debug(query: &Query) -> anyhow::Result<()> {
    let model = load_robot(&query.robot)?;
    let (roadmap, cmap) = load_roadmap(&query.roadmap, &model)?;
    let grid = cmap.grid();
    let world = load_world(&query.world, grid.origin, grid.resolution)?;
    let start = parse_list("start", &query.start)?;
    model.check_dim(&start)?;
    if !model.within_limits(&start) {
        bail!("--start is outside the joint limits");
    }
    let (target, position_only) = parse_target(&query.target)?;
    let mut params = match &query.params {
        Some(p) => {
            require_file(p)?;
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<PlannerParams>(&text).with_context(|| format!("invalid planner params {}", p.display()))?
        }
        None => PlannerParams::default(),
    };
    params.seed = query.seed;
    params.ik.position_only |= position_only;

    println!("roadmap        {} nodes, {} edges", roadmap.node_count(), roadmap.edge_count());
    println!("world          {} occupied voxels", world.len());
    let t = Instant::now();
    let result = plan_to_pose(&roadmap, &cmap, &model, &world, &[], &start, &target, &params);
    let elapsed = t.elapsed().as_secs_f64();
    println!("query time     {:.1} ms", 1e3 * elapsed);
    let (path, stats) = match result {
        Ok(r) => r,
        Err(DrmError::NoPath(why)) => {
            println!("verdict        NO_PATH ({why})");
            return Ok(());
        }
        Err(DrmError::StartInCollision) => {
            println!("verdict        NO_PATH (start configuration is in collision)");
            return Ok(());
        }
        Err(e) => return Err(e.into()),
    };
    println!("active         {} nodes, {} edges", stats.active_nodes, stats.active_edges);
    println!("neighborhood   {} nodes, {} dock attempts", stats.neighborhood, stats.dock_attempts);
    println!("cost           {:.4} rad (before shortcut {:.4})", path.length, stats.length_before_shortcut);
    let tool = model.tool_pose(path.waypoints.last().expect("paths are non-empty"))?;
    println!("tool error     {:.2e} m", (tool.translation - target.translation).norm());
    println!("waypoints      {}", path.waypoints.len());
    for (i, q) in path.waypoints.iter().enumerate() {
        println!("  {i:>3}  [{}]", fmt_q(q));
    }
    let verdict = validate_path(&path, &world, &model, &[], cmap.edge_step())?;
    match verdict {
        PathValidity::Ok => println!("validator      OK"),
        PathValidity::Violation { segment } => println!("validator      VIOLATION at segment {segment}"),
    }
    println!("verdict        {}", if verdict == PathValidity::Ok { "PATH" } else { "INVALID_PATH" });
    if let Some(out) = &query.export {
        let mut csv = String::new();
        let header: Vec<String> = (0..model.dof()).map(|j| format!("q{j}")).collect();
        let _ = writeln!(csv, "{}", header.join(","));
        for q in &path.waypoints {
            let _ = writeln!(csv, "{}", q.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        }
        write_file(out, csv)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_parsing() {
        let (p, pos_only) = parse_target("0.5, -0.2,1").unwrap();
        assert!(pos_only);
        assert_eq!(p.translation.to_array(), [0.5, -0.2, 1.0]);
        let (p, pos_only) = parse_target("1,0,0,0,0,1.5").unwrap();
        assert!(!pos_only);
        assert!((p.rotation.angle_to(&Mat3::rot_z(1.5))).abs() < 1e-12);
        assert!(parse_target("1,2").is_err());
        assert!(parse_target("1,x,2").is_err());
        assert!(parse_list("start", "1,nan").is_err());
    }

    #[test]
    fn world_boxes_use_the_given_grid() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("w.json");
        fs::write(&p, r#"{"boxes":[{"lo":[0.0,0.0,0.0],"hi":[0.25,0.05,0.05]}],"points":[[1.0,1.0,1.0]]}"#).unwrap();
        let w = load_world(&p, Vec3::zeros(), 0.1).unwrap();
        assert_eq!(w.len(), 3 + 1);
        fs::write(&p, r#"{"obstacles":[]}"#).unwrap();
        assert!(load_world(&p, Vec3::zeros(), 0.1).is_err());
    }
}
