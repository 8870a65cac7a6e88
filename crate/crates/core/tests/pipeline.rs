use shopbot_core::drm::{self, build_collision_map, build_roadmap, RoadmapParams};
use shopbot_core::executor::{run_campaign, Artifacts, Executor, Outcome, RunConfig, RunLog};
use shopbot_core::geometry::Vec3;
use shopbot_core::kinematics::{presets, RobotFile};
use shopbot_core::metrics::{CampaignReport, Taxonomy};
use shopbot_core::worldmodel::synthetic::{synthetic_store, SyntheticStoreParams};
use shopbot_core::worldmodel::StoreModel;
use shopbot_core::RobotModel;

/// Everything a campaign needs, once in memory and once after a trip through
/// the on-disk formats.
#[test]
fn serialized_artifacts_reproduce_the_campaign() {
    let params = SyntheticStoreParams { rows: 2, units_per_row: 3, out_of_stock_fraction: 0.1, ..Default::default() };
    let store = synthetic_store(&params, 3);
    store.validate().unwrap();
    let model: RobotModel = presets::desk_arm().build().unwrap();
    let roadmap = build_roadmap(&model, &RoadmapParams { nodes: 3000, neighbors: 10, seed: 2, edge_step: 0.05 }).unwrap();
    let cmap = build_collision_map(&roadmap, &model, Vec3::zeros(), 0.1, 0.05).unwrap();

    let store2 = StoreModel::from_json(&store.to_json()).unwrap();
    let model2: RobotModel = RobotFile::from_json(&presets::desk_arm().to_json()).unwrap().build().unwrap();
    let (roadmap2, cmap2) = drm::io::decode(&drm::io::encode(&roadmap, &cmap), &model2).unwrap();

    let cfg = RunConfig::default();
    let a = Executor::new(Artifacts { store: &store, model: &model, roadmap: &roadmap, cmap: &cmap }, cfg.clone()).unwrap();
    let b = Executor::new(Artifacts { store: &store2, model: &model2, roadmap: &roadmap2, cmap: &cmap2 }, cfg).unwrap();
    let logs = run_campaign(&a, 4, 77, None, 1).unwrap();
    assert_eq!(logs, run_campaign(&b, 4, 77, None, 2).unwrap());

    for log in &logs {
        log.check_well_formed().unwrap();
        log.check_transitions().unwrap();
        assert!(matches!(log.outcome, Outcome::Completed | Outcome::Fault { .. } | Outcome::Estop { .. }));
        assert_eq!(RunLog::from_jsonl(&log.to_jsonl()).unwrap(), *log);
    }
    let report = CampaignReport::from_logs(&logs, &Taxonomy::default()).unwrap();
    assert_eq!(CampaignReport::from_json(&report.to_json()).unwrap(), report);
    assert!((0.0..=1.0).contains(&report.task_success_rate));
    assert!((0.0..=1.0).contains(&report.shopping_success_rate));
    let failed: u64 = report.failure_breakdown.values().sum();
    assert_eq!(failed, report.runs_started - report.runs_completed);
}

#[test]
fn time_budget_stops_the_campaign_early() {
    let store = synthetic_store(&SyntheticStoreParams { rows: 2, units_per_row: 2, ..Default::default() }, 5);
    let model: RobotModel = presets::desk_arm().build().unwrap();
    let roadmap = build_roadmap(&model, &RoadmapParams { nodes: 2000, neighbors: 10, seed: 4, edge_step: 0.05 }).unwrap();
    let cmap = build_collision_map(&roadmap, &model, Vec3::zeros(), 0.1, 0.05).unwrap();
    let ex = Executor::new(Artifacts { store: &store, model: &model, roadmap: &roadmap, cmap: &cmap }, RunConfig::ideal()).unwrap();
    let all = run_campaign(&ex, 5, 1, None, 1).unwrap();
    let first = all[0].duration();
    // the budget is spent by the first run, so no second run starts
    let cut = run_campaign(&ex, 5, 1, Some(first * 0.5), 1).unwrap();
    assert_eq!(cut.len(), 1);
    assert_eq!(cut[0], all[0]);
}
