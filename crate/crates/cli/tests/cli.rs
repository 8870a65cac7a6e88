use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shopbot_core::drm;
use shopbot_core::kinematics::RobotFile;
use shopbot_core::metrics::CampaignReport;

fn shopbot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shopbot")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = shopbot(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}\n{}",
        String::from_utf8_lossy(&out.stderr),
        String::from_utf8_lossy(&out.stdout)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn planar_setup(dir: &Path) -> (PathBuf, PathBuf) {
    let robot = dir.join("planar.json");
    let roadmap = dir.join("planar.drm");
    ok(&["robot-preset", "--name", "planar2r", "--out", s(&robot)]);
    ok(&["build-roadmap", "--robot", s(&robot), "--nodes", "400", "--neighbors", "8", "--seed", "3", "--out", s(&roadmap)]);
    (robot, roadmap)
}

#[test]
fn build_roadmap_round_trips_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let (robot, roadmap) = planar_setup(dir.path());
    let again = dir.path().join("again.drm");
    let stdout = ok(&["build-roadmap", "--robot", s(&robot), "--nodes", "400", "--neighbors", "8", "--seed", "3", "--out", s(&again)]);
    assert!(stdout.contains("nodes          400"));
    assert!(stdout.contains("build time"));
    let bytes = fs::read(&roadmap).unwrap();
    assert_eq!(bytes, fs::read(&again).unwrap());

    let model = RobotFile::load(&robot).unwrap().build::<f64>().unwrap();
    let (r, c) = drm::io::load(&roadmap, &model).unwrap();
    assert_eq!(r.node_count(), 400);
    assert_eq!(drm::io::encode(&r, &c), bytes);

    let other = dir.path().join("other.drm");
    ok(&["build-roadmap", "--robot", s(&robot), "--nodes", "400", "--neighbors", "8", "--seed", "4", "--out", s(&other)]);
    assert_ne!(bytes, fs::read(&other).unwrap());
}

#[test]
fn missing_robot_file_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = shopbot(&[
        "build-roadmap",
        "--robot",
        s(&dir.path().join("nope.json")),
        "--seed",
        "1",
        "--out",
        s(&dir.path().join("x.drm")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("file not found"));
    assert!(!dir.path().join("x.drm").exists());
}

#[test]
fn usage_errors_exit_nonzero() {
    let out = shopbot(&["build-roadmap", "--nodes", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let out = shopbot(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

struct CampaignDir {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

fn campaign_setup() -> CampaignDir {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    ok(&["robot-preset", "--name", "desk-arm", "--out", s(&root.join("arm.json"))]);
    ok(&["generate-store", "--rows", "2", "--units", "3", "--seed", "7", "--out", s(&root.join("store.json"))]);
    ok(&[
        "build-roadmap",
        "--robot",
        s(&root.join("arm.json")),
        "--nodes",
        "4000",
        "--seed",
        "1",
        "--out",
        s(&root.join("arm.drm")),
    ]);
    CampaignDir { _tmp: tmp, root }
}

const IDEAL_RUN: &str = r#"{"grasp": {"success_probability": {
    "FlatCylindricalPinch": 1.0, "CapGrasp": 1.0, "HandleGrasp": 1.0, "HeavyDeformableGrasp": 1.0, "SuctionGrasp": 1.0}}}"#;

fn write_config(dir: &Path, name: &str, output: &str, seed: u64, n_runs: usize, run: &str) -> PathBuf {
    let text = format!(
        r#"{{"store": "store.json", "robot": "arm.json", "roadmap": "arm.drm", "output": "{output}",
            "seed": {seed}, "n_runs": {n_runs}, "run": {run}}}"#
    );
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read_report(dir: &Path) -> (String, CampaignReport) {
    let text = fs::read_to_string(dir.join("report.json")).unwrap();
    let report = CampaignReport::from_json(&text).unwrap();
    (text, report)
}

#[test]
fn campaign_end_to_end() {
    let c = campaign_setup();
    let root = &c.root;

    // noiseless campaign
    let cfg = write_config(root, "ideal.json", "ideal", 11, 3, IDEAL_RUN);
    ok(&["campaign", "--config", s(&cfg), "--workers", "2"]);
    let (ideal_text, ideal) = read_report(&root.join("ideal"));
    assert_eq!(ideal.runs_started, 3);
    assert_eq!(ideal.task_success_rate, 1.0);
    assert_eq!(ideal.shopping_success_rate, 1.0);
    assert!(root.join("ideal/report.txt").exists());
    assert_eq!(fs::read_to_string(root.join("ideal/runs.csv")).unwrap().lines().count(), 4);
    assert_eq!(fs::read_dir(root.join("ideal/logs")).unwrap().count(), 3);

    // same seed, different worker count: identical bytes
    ok(&["campaign", "--config", s(&cfg), "--workers", "1"]);
    assert_eq!(read_report(&root.join("ideal")).0, ideal_text);

    // recomputation identity
    let recomputed = ok(&["report", "--logs", s(&root.join("ideal/logs"))]);
    assert_eq!(recomputed, ideal_text);

    // a faulty campaign still exits 0
    let noisy = r#"{"faults": {"joint_control_error_rate": 0.3, "detection_miss_rate": 0.3}}"#;
    let cfg = write_config(root, "noisy.json", "noisy", 12, 4, noisy);
    ok(&["campaign", "--config", s(&cfg)]);
    let (_, noisy) = read_report(&root.join("noisy"));
    assert_eq!(noisy.runs_started, 4);
    assert!(noisy.runs_completed < 4);
    let failures: u64 = noisy.failure_breakdown.values().sum();
    assert_eq!(failures, noisy.runs_started - noisy.runs_completed);

    // pooling two campaigns against totals computed by hand from their reports
    let merged = ok(&["report", "--logs", s(&root.join("ideal/logs")), "--logs", s(&root.join("noisy/logs"))]);
    let merged = CampaignReport::from_json(&merged).unwrap();
    let started = ideal.runs_started + noisy.runs_started;
    let completed = ideal.runs_completed + noisy.runs_completed;
    let requested = ideal.items_requested + noisy.items_requested;
    let retrieved = ideal.items_retrieved + noisy.items_retrieved;
    assert_eq!(merged.runs_started, started);
    assert_eq!(merged.runs_completed, completed);
    assert_eq!(merged.task_success_rate, completed as f64 / started as f64);
    assert_eq!(merged.shopping_success_rate, retrieved as f64 / requested as f64);
    assert_eq!(merged.runs.len(), 7);
    assert_eq!(merged.runs[..3], ideal.runs[..]);
}

#[test]
fn campaign_config_errors() {
    let c = campaign_setup();
    let root = &c.root;
    let cfg = write_config(root, "bad.json", "bad", 1, 1, r#"{"faults": {"estop_rate": 1.5}}"#);
    let out = shopbot(&["campaign", "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("estop_rate"));

    let cfg = write_config(root, "typo.json", "bad", 1, 1, r#"{"faults": {"estop_rat": 0.1}}"#);
    let out = shopbot(&["campaign", "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown field `estop_rat`"));

    let p = root.join("noseed.json");
    fs::write(&p, r#"{"store": "store.json", "robot": "arm.json", "roadmap": "arm.drm", "output": "x", "n_runs": 1}"#).unwrap();
    let out = shopbot(&["campaign", "--config", s(&p)]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing field `seed`"));

    // roadmap built for another robot
    ok(&["robot-preset", "--name", "planar2r", "--out", s(&root.join("arm.json"))]);
    let cfg = write_config(root, "mismatch.json", "bad", 1, 1, "{}");
    let out = shopbot(&["campaign", "--config", s(&cfg)]);
    assert!(!out.status.success());
    assert!(!root.join("bad").exists());
}

#[test]
fn report_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = shopbot(&["report", "--logs", s(dir.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("no run logs"));

    fs::write(dir.path().join("run_00000.jsonl"), "{\"line\":\"header\"}\n").unwrap();
    let out = shopbot(&["report", "--logs", s(dir.path())]);
    assert!(!out.status.success());

    let out = shopbot(&["report", "--logs", s(&dir.path().join("missing"))]);
    assert!(!out.status.success());
}

fn plan(robot: &Path, roadmap: &Path, world: &Path, start: &str, target: &str) -> String {
    ok(&[
        "plan-debug",
        "--robot",
        s(robot),
        "--roadmap",
        s(roadmap),
        "--world",
        s(world),
        "--start",
        start,
        "--target",
        target,
    ])
}

#[test]
fn plan_debug_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let (robot, roadmap) = planar_setup(dir.path());
    let empty = dir.path().join("empty.json");
    fs::write(&empty, "{}").unwrap();

    // the tool of the planar arm sits at (2, 0, 0) at the zero configuration
    let out = plan(&robot, &roadmap, &empty, "0,0", "2,0,0,0,0,0");
    assert!(out.contains("waypoints      1\n"), "{out}");
    assert!(out.contains("validator      OK"));

    let out = plan(&robot, &roadmap, &empty, "0,0", "-1.2,0.9,0");
    assert!(out.contains("verdict        PATH"), "{out}");
    assert!(out.contains("validator      OK"));

    let walls = dir.path().join("walls.json");
    fs::write(&walls, r#"{"boxes": [{"lo": [-1.6, 0.5, -0.2], "hi": [-0.8, 1.3, 0.2]}]}"#).unwrap();
    let out = plan(&robot, &roadmap, &walls, "0,0", "-1.2,0.9,0");
    assert!(out.contains("verdict        NO_PATH"), "{out}");

    let export = dir.path().join("path.csv");
    ok(&[
        "plan-debug",
        "--robot",
        s(&robot),
        "--roadmap",
        s(&roadmap),
        "--world",
        s(&walls),
        "--start",
        "0,0",
        "--target",
        "0.3,1.6,0",
        "--export",
        s(&export),
    ]);
    let csv = fs::read_to_string(&export).unwrap();
    assert!(csv.starts_with("q0,q1\n0,0\n"), "{csv}");

    let out = shopbot(&[
        "plan-debug",
        "--robot",
        s(&robot),
        "--roadmap",
        s(&roadmap),
        "--world",
        s(&empty),
        "--start",
        "0,0,0",
        "--target",
        "1,1,0",
    ]);
    assert!(!out.status.success());
}
