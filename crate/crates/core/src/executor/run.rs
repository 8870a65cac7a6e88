use std::collections::BTreeMap;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ConfigError, RunConfig};
use super::fsm::{step_fsm, FsmEvent, ItemState, TaskState};
use super::log::{EventKind, Outcome, RunLog, TaskEvent};
use crate::drm::{plan_to_pose, validate_path, CollisionMap, DrmError, JointPath, PathValidity, Roadmap};
use crate::geometry::{Isometry, Mat3, Vec3};
use crate::grasp::{self, Detection, GraspError, GraspOutcome, GraspPlan};
use crate::kinematics::RobotModel;
use crate::nav::{self, BasePose, BaseSim, NavError};
use crate::worldmodel::{
    derive_elevation_in, generate_shopping_list, inflate, voxelize_shelf, GridSpec2, ItemId, ItemRecord, OccupancyGrid,
    ShoppingList, StoreModel, VoxelMap,
};

/// Failure taxonomy categories used in `failed` events and run outcomes.
pub mod cause {
    pub const JOINT_CONTROL: &str = "joint_control_errors";
    pub const COLLISION: &str = "collision";
    pub const SOFTWARE: &str = "software_fault";
    pub const ESTOP: &str = "e_stop";
    pub const OTHER: &str = "other";
}

/// Instances shown to the detector at most.
const MAX_VISIBLE_INSTANCES: u32 = 4;

/// The loaded artifacts a run works with.
#[derive(Clone, Copy)]
pub struct Artifacts<'a> {
    pub store: &'a StoreModel,
    pub model: &'a RobotModel<f64>,
    pub roadmap: &'a Roadmap,
    pub cmap: &'a CollisionMap,
}

/// Validated artifacts and configuration plus the derived navigation grid;
/// shared read-only by all runs of a campaign.
pub struct Executor<'a> {
    art: Artifacts<'a>,
    cfg: RunConfig,
    /// Inflated by radius plus margin; base paths and goals are planned here.
    grid: OccupancyGrid<f64>,
    /// Inflated by the radius only; the follower aborts when the true base enters it.
    safety: OccupancyGrid<f64>,
}

impl<'a> Executor<'a> {
    pub fn new(art: Artifacts<'a>, cfg: RunConfig) -> Result<Self, ConfigError> {
        cfg.validate()?;
        art.store.validate()?;
        if !art.roadmap.matches_model(art.model) {
            return Err(ConfigError::ModelMismatch);
        }
        art.model.check_dim(&cfg.arm.home).map_err(|e| ConfigError::Home(e.to_string()))?;
        if !art.model.within_limits(&cfg.arm.home) {
            return Err(ConfigError::Home("outside joint limits".into()));
        }
        let n = &cfg.nav;
        let grid = nav_grid(art.store, n.grid_resolution, n.obstacle_height, n.robot_radius + n.plan_margin)?;
        let safety = nav_grid(art.store, n.grid_resolution, n.obstacle_height, n.robot_radius)?;
        Ok(Self { art, cfg, grid, safety })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn nav_grid(&self) -> &OccupancyGrid<f64> {
        &self.grid
    }

    /// Executes one shopping run.
    pub fn run(&self, list: &ShoppingList, seed: u64) -> Result<RunLog, ConfigError> {
        for e in &list.entries {
            let item = self.art.store.item(e.item).ok_or(ConfigError::UnknownItem(e.item))?;
            self.art.store.shelf_of(item).ok_or(ConfigError::ItemOffShelf(e.item))?;
        }
        Ok(Run::new(self, list, seed).execute())
    }

    /// Shelves near `base`, expressed in the base frame, plus a floor layer,
    /// on the collision map's grid.
    pub fn arm_world(&self, base: &BasePose) -> VoxelMap<f64> {
        let g = self.art.cmap.grid();
        let mut world = VoxelMap::new(g.resolution, g.origin).expect("collision map grid is valid");
        let to_base = base.isometry().inverse();
        let r = self.cfg.arm.world_radius;
        for shelf in &self.art.store.shelves {
            let (lo, hi) = shelf.aabb();
            let dx = (lo.x - base.x).max(base.x - hi.x).max(0.0);
            let dy = (lo.y - base.y).max(base.y - hi.y).max(0.0);
            if dx.hypot(dy) <= r {
                voxelize_shelf(&mut world, shelf, &to_base);
            }
        }
        let floor = g.origin.z.min(0.0) - g.resolution;
        world
            .fill_box(Vec3::new(-r, -r, floor), Vec3::new(r, r, -1e-9))
            .expect("finite floor box");
        world
    }

    /// Tool pose in front of the shelf from which the straight approach starts,
    /// store frame.
    pub fn pregrasp_pose(&self, item: &ItemRecord, plan: &GraspPlan) -> Option<Isometry<f64>> {
        let shelf = self.art.store.shelf_of(item)?;
        let out = plan.approach_axis;
        let exit = shelf.exit_distance(plan.tool_pose.translation, [out.x, out.y]);
        let p = plan.tool_pose.translation + out * (exit + self.cfg.arm.pregrasp_clearance);
        Some(Isometry::new(plan.tool_pose.rotation, p))
    }

    /// Base goal in front of `item`, searched over the configured face gaps.
    pub fn base_goal(&self, item: &ItemRecord) -> Result<BasePose, NavError> {
        let exit = self
            .art
            .store
            .shelf_of(item)
            .map_or(0.0, |s| s.exit_distance(item.position(), item.outward_axis));
        let n = &self.cfg.nav;
        nav::item_goal_pose(item, &self.grid, exit + n.face_gap_min, exit + n.face_gap_max)
    }

    /// Plans the arm from home to the pre-grasp pose of `item` with the base at `base`.
    pub fn plan_arm(&self, base: &BasePose, target_store: &Isometry<f64>, seed: u64) -> Result<JointPath, DrmError> {
        let world = self.arm_world(base);
        let target = aim_at_yaw_axis(&base.isometry().inverse().compose(target_store));
        let mut params = self.cfg.arm.planner.clone();
        params.seed = seed;
        let (path, _) = plan_to_pose(self.art.roadmap, self.art.cmap, self.art.model, &world, &[], &self.cfg.arm.home, &target, &params)?;
        match validate_path(&path, &world, self.art.model, &[], self.art.cmap.edge_step())? {
            PathValidity::Ok => Ok(path),
            PathValidity::Violation { .. } => Err(DrmError::NoPath("planned path failed validation".into())),
        }
    }
}

/// Rotates `target` about the vertical through its position so that its
/// approach direction lies in the vertical plane through the base z axis.
/// An arm with a single yaw joint below pitch joints reaches only such
/// orientations; the correction absorbs small lateral base placement errors.
fn aim_at_yaw_axis(target: &Isometry<f64>) -> Isometry<f64> {
    let p = target.translation;
    let z = target.rotation.column(2);
    if p.x.hypot(p.y) < 1e-9 || z.x.hypot(z.y) < 1e-9 {
        return *target;
    }
    let delta = crate::scalar::wrap_angle(p.y.atan2(p.x) - z.y.atan2(z.x));
    Isometry::new(Mat3::rot_z(delta).mul_mat(&target.rotation), p)
}

/// Obstacle grid for the base: shelf voxels, elevation, inflation by the
/// robot radius.
fn nav_grid(store: &StoreModel, resolution: f64, obstacle_height: f64, radius: f64) -> Result<OccupancyGrid<f64>, ConfigError> {
    let map = store.to_voxel_map(store.resolution.unwrap_or(resolution))?;
    let (lo, hi) = store.floor_bounds(1.0);
    let spec = GridSpec2::covering(lo, hi, resolution);
    let elev = derive_elevation_in(&map, 0.0, f64::MAX, spec, 1)?;
    Ok(inflate(&elev, obstacle_height, radius))
}

pub fn run_task(art: Artifacts<'_>, list: &ShoppingList, cfg: &RunConfig, seed: u64) -> Result<RunLog, ConfigError> {
    Executor::new(art, cfg.clone())?.run(list, seed)
}

/// Seeds of the runs of a campaign, derived from the campaign seed.
pub fn run_seeds(seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// Executes up to `n_runs` runs with lists drawn from their seeds. With a
/// time budget, the campaign ends after the run during which the summed
/// simulated time reaches it. Runs execute `workers` at a time; the result is
/// in seed order and does not depend on `workers`.
pub fn run_campaign(
    ex: &Executor<'_>,
    n_runs: usize,
    seed: u64,
    time_budget: Option<f64>,
    workers: usize,
) -> Result<Vec<RunLog>, ConfigError> {
    if n_runs == 0 {
        return Err(ConfigError::Invalid("n_runs must be at least 1".into()));
    }
    if time_budget.is_some_and(|b| !(b > 0.0)) {
        return Err(ConfigError::Invalid("time budget must be positive".into()));
    }
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| ConfigError::Invalid(format!("thread pool: {e}")))?;
    let seeds = run_seeds(seed, n_runs);
    let mut logs = Vec::new();
    let mut elapsed = 0.0;
    for chunk in seeds.chunks(workers) {
        let batch: Vec<Result<RunLog, ConfigError>> = pool.install(|| {
            chunk
                .par_iter()
                .map(|&s| {
                    let list = generate_shopping_list(ex.art.store, s)?;
                    ex.run(&list, s)
                })
                .collect()
        });
        for log in batch {
            let log = log?;
            elapsed += log.duration();
            logs.push(log);
            if time_budget.is_some_and(|b| elapsed >= b) {
                return Ok(logs);
            }
        }
    }
    Ok(logs)
}

/// Mutable state of one run.
struct Run<'e, 'a> {
    ex: &'e Executor<'a>,
    list: &'e ShoppingList,
    seed: u64,
    rng: ChaCha8Rng,
    sim: BaseSim,
    state: TaskState,
    t: f64,
    events: Vec<TaskEvent>,
    retrieved: Vec<ItemId>,
    stock: BTreeMap<ItemId, u32>,
    outcome: Option<Outcome>,
    // per-item bookkeeping
    tour: Vec<usize>,
    goals: Vec<BasePose>,
    next: usize,
    entry: Option<usize>,
    goal: Option<BasePose>,
    picked: u32,
    detect_failures: u32,
    grasp_failures: u32,
    motion_failures: u32,
    grasp_plan: Option<GraspPlan>,
    arm_path: Option<JointPath>,
    grasp_outcome: Option<GraspOutcome>,
}

/// What an action reports back to the loop.
struct Step {
    kind: EventKind,
    event: FsmEvent,
    duration: f64,
    payload: BTreeMap<String, f64>,
}

impl Step {
    fn ok(event: FsmEvent, duration: f64) -> Self {
        Self { kind: EventKind::Succeeded, event, duration, payload: BTreeMap::new() }
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.payload.insert(key.to_string(), v);
        self
    }

    fn fault(cause: &str, detail: impl Into<String>) -> Self {
        Self {
            kind: EventKind::Failed { cause: cause.into(), detail: detail.into() },
            event: FsmEvent::Fault,
            duration: 0.0,
            payload: BTreeMap::new(),
        }
    }

    fn retry(detail: &str, duration: f64) -> Self {
        Self { kind: EventKind::Retried { detail: detail.into() }, event: FsmEvent::Retry, duration, payload: BTreeMap::new() }
    }

    fn skip(reason: &str, duration: f64) -> Self {
        Self { kind: EventKind::Skipped { reason: reason.into() }, event: FsmEvent::GiveUp, duration, payload: BTreeMap::new() }
    }
}

impl<'e, 'a> Run<'e, 'a> {
    fn new(ex: &'e Executor<'a>, list: &'e ShoppingList, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [x, y, yaw] = ex.art.store.start_pose;
        let sim = BaseSim::new(BasePose::new(x, y, yaw), ex.cfg.nav.drift, rng.next_u64());
        let stock = ex.art.store.items.iter().map(|i| (i.id, i.in_stock)).collect();
        Self {
            ex,
            list,
            seed,
            rng,
            sim,
            state: TaskState::Start,
            t: 0.0,
            events: Vec::new(),
            retrieved: Vec::new(),
            stock,
            outcome: None,
            tour: Vec::new(),
            goals: Vec::new(),
            next: 0,
            entry: None,
            goal: None,
            picked: 0,
            detect_failures: 0,
            grasp_failures: 0,
            motion_failures: 0,
            grasp_plan: None,
            arm_path: None,
            grasp_outcome: None,
        }
    }

    fn fire(&mut self, event: FsmEvent) {
        let (next, _) = step_fsm(self.state, event).unwrap_or_else(|v| panic!("executor bug: {v}"));
        self.state = next;
    }

    fn current_item(&self) -> Option<ItemId> {
        match self.state {
            TaskState::ItemLoop(ItemState::NextItem) => None,
            TaskState::ItemLoop(_) => self.entry.map(|k| self.list.entries[k].item),
            _ => None,
        }
    }

    fn record(&mut self, kind: EventKind, payload: BTreeMap<String, f64>) {
        self.events.push(TaskEvent { sim_time: self.t, state: self.state, kind, item: self.current_item(), payload });
    }

    fn chance(&mut self, p: f64) -> bool {
        p > 0.0 && (p >= 1.0 || self.rng.random::<f64>() < p)
    }

    fn execute(mut self) -> RunLog {
        self.fire(FsmEvent::Begin);
        while !self.state.is_terminal() {
            self.record(EventKind::Entered, BTreeMap::new());
            let step = self.interrupts().unwrap_or_else(|| self.act());
            self.t += step.duration;
            if let EventKind::Estop { cause } = &step.kind {
                self.outcome = Some(Outcome::Estop { cause: cause.clone() });
            } else if let (EventKind::Failed { cause, .. }, FsmEvent::Fault) = (&step.kind, step.event) {
                self.outcome = Some(Outcome::Fault { cause: cause.clone() });
            }
            self.record(step.kind, step.payload);
            self.fire(step.event);
        }
        let outcome = match self.state {
            TaskState::Done => Outcome::Completed,
            _ => self.outcome.take().unwrap_or(Outcome::Fault { cause: cause::OTHER.into() }),
        };
        RunLog { seed: self.seed, list: self.list.clone(), events: self.events, outcome, items_retrieved: self.retrieved }
    }

    /// Channels that can end the run on entry to any state.
    fn interrupts(&mut self) -> Option<Step> {
        let f = self.ex.cfg.faults;
        if self.chance(f.estop_rate) {
            return Some(Step {
                kind: EventKind::Estop { cause: cause::ESTOP.into() },
                event: FsmEvent::EStop,
                duration: 0.0,
                payload: BTreeMap::new(),
            });
        }
        if self.chance(f.software_fault_rate) {
            return Some(Step::fault(cause::SOFTWARE, "software fault"));
        }
        if self.t > self.ex.cfg.watchdog {
            return Some(Step::fault(cause::SOFTWARE, "watchdog: run exceeded its time limit"));
        }
        None
    }

    fn act(&mut self) -> Step {
        use ItemState as I;
        match self.state {
            TaskState::Localize => Step::ok(FsmEvent::Localized, self.ex.cfg.durations.localize),
            TaskState::PlanTour => self.plan_tour(),
            TaskState::ItemLoop(s) => match s {
                I::NextItem => self.next_item(),
                I::Navigate => self.navigate(),
                I::Relocalize => self.relocalize(),
                I::Detect => self.detect(),
                I::PlanGrasp => self.plan_grasp(),
                I::PlanMotion => self.plan_motion(),
                I::ExecuteGrasp => self.execute_grasp(),
                I::VerifyGrasp => self.verify_grasp(),
                I::Place => self.place(),
            },
            TaskState::ReturnHome => self.return_home(),
            TaskState::Start | TaskState::Done | TaskState::Aborted => unreachable!("not an action state"),
        }
    }

    fn entry_item(&self) -> &'e ItemRecord {
        let k = self.entry.expect("an item is selected");
        self.ex.art.store.item(self.list.entries[k].item).expect("list checked against the store")
    }

    fn plan_tour(&mut self) -> Step {
        let d = self.ex.cfg.durations.plan_tour;
        let mut poses = vec![self.sim.state.estimated];
        for e in &self.list.entries {
            let item = self.ex.art.store.item(e.item).expect("list checked against the store");
            match self.ex.base_goal(item) {
                Ok(p) => poses.push(p),
                Err(err) => return Step::fault(cause::OTHER, format!("no base goal for item {}: {err}", e.item)),
            }
        }
        let tour = nav::pairwise_costs(&self.ex.grid, &poses).and_then(|c| nav::plan_tour(&c, 0));
        match tour {
            Ok(t) => {
                let step = Step::ok(FsmEvent::TourPlanned, d).with("tour_cost", t.cost).with("exact_matching", t.exact_matching as u8 as f64);
                self.tour = t.order[1..].iter().map(|&k| k - 1).collect();
                self.goals = poses[1..].to_vec();
                step
            }
            Err(err) => Step::fault(cause::OTHER, format!("tour planning: {err}")),
        }
    }

    fn next_item(&mut self) -> Step {
        self.entry = None;
        if self.next < self.tour.len() {
            let k = self.tour[self.next];
            self.next += 1;
            self.entry = Some(k);
            self.goal = Some(self.goals[k]);
            self.picked = 0;
            self.detect_failures = 0;
            self.grasp_failures = 0;
            Step::ok(FsmEvent::ItemsRemaining, 0.0).with("entry", k as f64)
        } else {
            Step::ok(FsmEvent::ListExhausted, 0.0)
        }
    }

    /// Plans on the grid from the current estimate to `goal` and drives there.
    fn drive(&mut self, goal: BasePose) -> Result<(f64, f64), String> {
        let grid = &self.ex.grid;
        let est = self.sim.state.estimated;
        let cell = |p: &BasePose| grid.spec.cell_of(p.x, p.y).ok_or_else(|| format!("({:.2}, {:.2}) is off the map", p.x, p.y));
        let path = nav::grid_plan(grid, cell(&est)?, cell(&goal)?).map_err(|e| e.to_string())?;
        let mut wps = path.waypoints;
        if let Some(last) = wps.last_mut() {
            *last = [goal.x, goal.y];
        }
        let report = nav::follow_path(&mut self.sim, &wps, Some(goal.yaw), &self.ex.cfg.nav.follower, Some(&self.ex.safety)).map_err(|e| e.to_string())?;
        Ok((report.duration, report.distance))
    }

    fn navigate(&mut self) -> Step {
        let goal = self.goal.expect("goal set with the item");
        match self.drive(goal) {
            Ok((dur, dist)) => Step { duration: dur, ..Step::ok(FsmEvent::Arrived, 0.0) }.with("distance", dist),
            Err(e) => Step::fault(cause::OTHER, format!("navigation: {e}")),
        }
    }

    fn relocalize(&mut self) -> Step {
        let before = self.sim.state.position_error();
        self.sim.relocalize(self.ex.cfg.nav.relocalize_sigma);
        Step::ok(FsmEvent::Relocalized, self.ex.cfg.durations.relocalize).with("error_before", before)
    }

    fn detect(&mut self) -> Step {
        let d = self.ex.cfg.durations.detect;
        let f = self.ex.cfg.faults;
        let item = self.entry_item();
        let stock = self.stock.get(&item.id).copied().unwrap_or(0);
        if stock == 0 {
            return Step::skip("out_of_stock", d);
        }
        let miss = if self.chance(f.detection_miss_rate) {
            Some("detection miss")
        } else if self.chance(f.detection_misclass_rate) {
            Some("misclassified item")
        } else {
            None
        };
        if let Some(detail) = miss {
            self.detect_failures += 1;
            return if self.detect_failures <= f.retries.detection {
                Step::retry(detail, d)
            } else {
                Step::skip("detection retries exhausted", d)
            };
        }
        let visible = stock.min(MAX_VISIBLE_INSTANCES);
        let detections: Vec<Detection> = (0..visible)
            .map(|k| Detection {
                position: [k as f64 * item.dims[0], 0.0, 0.0],
                visibility: if k == 0 { 1.0 } else { 0.3 },
                occluded: k > 0,
            })
            .collect();
        match grasp::select_instance(&detections) {
            Ok(k) => Step::ok(FsmEvent::Detected, d).with("instances", visible as f64).with("selected", k as f64),
            Err(_) => Step::skip("no instance selected", d),
        }
    }

    fn plan_grasp(&mut self) -> Step {
        let d = self.ex.cfg.durations.plan_grasp;
        let item = self.entry_item();
        match grasp::plan_grasp(item) {
            Ok(plan) => {
                let gt = grasp::GraspType::ALL.iter().position(|g| *g == plan.grasp_type).unwrap_or(0);
                self.grasp_plan = Some(plan);
                self.motion_failures = 0;
                Step::ok(FsmEvent::GraspPlanned, d).with("grasp_type", gt as f64)
            }
            Err(GraspError::PlanInfeasible(why)) => Step::skip(why, d),
            Err(e) => Step::skip(&e.to_string(), d),
        }
    }

    fn plan_motion(&mut self) -> Step {
        let d = self.ex.cfg.durations.plan_motion;
        let f = self.ex.cfg.faults;
        let item = self.entry_item();
        let failed = if self.chance(f.motion_plan_fault_rate) {
            Err("planner fault".to_string())
        } else {
            let plan = self.grasp_plan.as_ref().expect("grasp planned");
            let target = self.ex.pregrasp_pose(item, plan).expect("item checked to be on a shelf");
            let seed = self.rng.next_u64();
            let r = self.ex.plan_arm(&self.sim.state.estimated, &target, seed).map_err(|e| e.to_string());
            r
        };
        match failed {
            Ok(path) => {
                let step = Step::ok(FsmEvent::MotionPlanned, d).with("path_length", path.length).with("waypoints", path.len() as f64);
                self.arm_path = Some(path);
                step
            }
            Err(detail) => {
                self.motion_failures += 1;
                if self.motion_failures <= f.retries.motion {
                    Step::retry(&detail, d)
                } else {
                    Step::skip("motion planning retries exhausted", d)
                }
            }
        }
    }

    fn execute_grasp(&mut self) -> Step {
        let cfg = &self.ex.cfg;
        let f = cfg.faults;
        if self.chance(f.joint_control_error_rate) {
            return Step::fault(cause::JOINT_CONTROL, "joint controller reported a tracking error");
        }
        if self.chance(f.collision_rate) {
            return Step::fault(cause::COLLISION, "unexpected contact during the grasp motion");
        }
        let item = self.entry_item();
        let plan = self.grasp_plan.as_ref().expect("grasp planned");
        let outcome = grasp::simulate_grasp_outcome(plan, item, &cfg.grasp, &mut self.rng);
        self.grasp_outcome = Some(outcome);
        let arm = self.arm_path.as_ref().map_or(0.0, |p| p.length);
        let duration = cfg.durations.execute_grasp + 2.0 * arm / cfg.durations.joint_speed;
        Step::ok(FsmEvent::Executed, duration).with("arm_travel", 2.0 * arm)
    }

    fn verify_grasp(&mut self) -> Step {
        let cfg = &self.ex.cfg;
        let d = cfg.durations.verify;
        let item = self.entry_item();
        let plan = self.grasp_plan.as_ref().expect("grasp planned");
        let outcome = self.grasp_outcome.take().expect("grasp executed");
        match grasp::verify_grasp(&outcome.signals, plan.tool, item.weight_newton(), &cfg.grasp.thresholds) {
            Ok(true) => {
                if let Some(s) = self.stock.get_mut(&item.id) {
                    *s = s.saturating_sub(1);
                }
                Step::ok(FsmEvent::Verified, d).with("tip_wrench", outcome.signals.tip_wrench)
            }
            Ok(false) => {
                self.grasp_failures += 1;
                if self.grasp_failures <= cfg.faults.retries.grasp {
                    Step::retry("grasp not verified", d)
                } else {
                    Step::skip("grasp retries exhausted", d)
                }
            }
            Err(e) => Step::fault(cause::SOFTWARE, e.to_string()),
        }
    }

    fn place(&mut self) -> Step {
        let k = self.entry.expect("an item is selected");
        let entry = self.list.entries[k];
        self.retrieved.push(entry.item);
        self.picked += 1;
        self.detect_failures = 0;
        let event = if self.picked < entry.instances { FsmEvent::InstancesRemaining } else { FsmEvent::ItemDone };
        Step::ok(event, self.ex.cfg.durations.place).with("picked", self.picked as f64)
    }

    fn return_home(&mut self) -> Step {
        let [x, y, yaw] = self.ex.art.store.start_pose;
        match self.drive(BasePose::new(x, y, yaw)) {
            Ok((dur, dist)) => Step { duration: dur, ..Step::ok(FsmEvent::HomeReached, 0.0) }.with("distance", dist),
            Err(e) => Step::fault(cause::OTHER, format!("navigation: {e}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::OnceLock;

    use super::*;
    use crate::drm::{build_collision_map, build_roadmap, RoadmapParams};
    use crate::executor::log::LogError;
    use crate::kinematics::presets;
    use crate::worldmodel::synthetic::{synthetic_store, SyntheticStoreParams};
    use crate::worldmodel::ListEntry;

    struct Fixture {
        store: StoreModel,
        model: RobotModel<f64>,
        roadmap: Roadmap,
        cmap: CollisionMap,
    }

    fn fixture() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let model = presets::desk_arm().build::<f64>().unwrap();
            let roadmap = build_roadmap(&model, &RoadmapParams { nodes: 4000, neighbors: 10, seed: 1, edge_step: 0.05 }).unwrap();
            let cmap = build_collision_map(&roadmap, &model, Vec3::zeros(), 0.1, 0.05).unwrap();
            let params = SyntheticStoreParams { rows: 2, units_per_row: 3, ..SyntheticStoreParams::default() };
            Fixture { store: synthetic_store(&params, 7), model, roadmap, cmap }
        })
    }

    fn art(f: &Fixture) -> Artifacts<'_> {
        Artifacts { store: &f.store, model: &f.model, roadmap: &f.roadmap, cmap: &f.cmap }
    }

    fn checked(log: &RunLog) {
        log.check_well_formed().unwrap();
        log.check_transitions().unwrap();
    }

    #[test]
    fn ideal_run_retrieves_everything() {
        let f = fixture();
        let list = generate_shopping_list(&f.store, 3).unwrap();
        let log = run_task(art(f), &list, &RunConfig::ideal(), 3).unwrap();
        checked(&log);
        assert_eq!(log.outcome, Outcome::Completed);
        assert_eq!(log.items_retrieved.len() as u32, list.total_instances());
        let mut want: Vec<ItemId> = list.entries.iter().map(|e| e.item).collect();
        let mut got = log.items_retrieved.clone();
        want.sort();
        got.sort();
        got.dedup();
        assert_eq!(got, want);
    }

    #[test]
    fn estop_on_first_action() {
        let f = fixture();
        let mut cfg = RunConfig::ideal();
        cfg.faults.estop_rate = 1.0;
        let list = generate_shopping_list(&f.store, 4).unwrap();
        let log = run_task(art(f), &list, &cfg, 4).unwrap();
        checked(&log);
        assert_eq!(log.outcome, Outcome::Estop { cause: cause::ESTOP.into() });
        assert!(log.items_retrieved.is_empty());
        assert_eq!(log.events.len(), 2);
        assert_eq!(log.events[0].state, TaskState::Localize);
    }

    #[test]
    fn out_of_stock_item_is_skipped() {
        let f = fixture();
        let list = generate_shopping_list(&f.store, 5).unwrap();
        let gone = list.entries[0].item;
        let mut store = f.store.clone();
        store.items.iter_mut().find(|i| i.id == gone).unwrap().in_stock = 0;
        let a = Artifacts { store: &store, ..art(f) };
        let log = run_task(a, &list, &RunConfig::ideal(), 5).unwrap();
        checked(&log);
        assert!(log.outcome.is_completed());
        assert!(!log.items_retrieved.contains(&gone));
        assert_eq!(log.items_retrieved.len() as u32, list.total_instances() - list.entries[0].instances);
        let skipped = log
            .events
            .iter()
            .filter(|e| e.item == Some(gone) && matches!(&e.kind, EventKind::Skipped { reason } if reason == "out_of_stock"))
            .count();
        assert_eq!(skipped, 1);
    }

    #[test]
    fn stock_runs_out_after_one_instance() {
        let f = fixture();
        let list = generate_shopping_list(&f.store, 6).unwrap();
        let e = *list.entries.iter().find(|e| e.instances == 2).expect("some entry wants two");
        let mut store = f.store.clone();
        store.items.iter_mut().find(|i| i.id == e.item).unwrap().in_stock = 1;
        let a = Artifacts { store: &store, ..art(f) };
        let log = run_task(a, &list, &RunConfig::ideal(), 6).unwrap();
        checked(&log);
        assert!(log.outcome.is_completed());
        assert_eq!(log.items_retrieved.iter().filter(|i| **i == e.item).count(), 1);
    }

    #[test]
    fn failed_grasps_are_retried_then_skipped() {
        let f = fixture();
        let mut cfg = RunConfig::ideal();
        cfg.grasp = grasp::GraspSimParams::uniform(0.0);
        let list = generate_shopping_list(&f.store, 8).unwrap();
        let log = run_task(art(f), &list, &cfg, 8).unwrap();
        checked(&log);
        assert!(log.outcome.is_completed(), "zero retrieved with full visitation still completes");
        assert!(log.items_retrieved.is_empty());
        let retried = log.events.iter().filter(|e| matches!(e.kind, EventKind::Retried { .. })).count();
        assert_eq!(retried, 2 * list.entries.len());
    }

    #[test]
    fn joint_fault_ends_the_run() {
        let f = fixture();
        let mut cfg = RunConfig::ideal();
        cfg.faults.joint_control_error_rate = 1.0;
        let list = generate_shopping_list(&f.store, 9).unwrap();
        let log = run_task(art(f), &list, &cfg, 9).unwrap();
        checked(&log);
        assert_eq!(log.outcome, Outcome::Fault { cause: cause::JOINT_CONTROL.into() });
        assert_eq!(log.events.last().unwrap().state, TaskState::ItemLoop(ItemState::ExecuteGrasp));
    }

    #[test]
    fn detection_misses_exhaust_retries() {
        let f = fixture();
        let mut cfg = RunConfig::ideal();
        cfg.faults.detection_miss_rate = 1.0;
        cfg.faults.retries.detection = 1;
        let list = generate_shopping_list(&f.store, 10).unwrap();
        let log = run_task(art(f), &list, &cfg, 10).unwrap();
        checked(&log);
        assert!(log.outcome.is_completed());
        let detects = log.events.iter().filter(|e| e.state == TaskState::ItemLoop(ItemState::Detect) && e.kind == EventKind::Entered).count();
        assert_eq!(detects, 2 * list.entries.len());
    }

    #[test]
    fn visitation_follows_the_tour() {
        let f = fixture();
        let list = generate_shopping_list(&f.store, 11).unwrap();
        let log = run_task(art(f), &list, &RunConfig::ideal(), 11).unwrap();
        let visited: Vec<ItemId> = log
            .events
            .iter()
            .filter(|e| e.state == TaskState::ItemLoop(ItemState::Navigate) && e.kind == EventKind::Entered)
            .filter_map(|e| e.item)
            .collect();
        let order: Vec<f64> = log
            .events
            .iter()
            .filter(|e| e.state == TaskState::ItemLoop(ItemState::NextItem))
            .filter_map(|e| e.payload.get("entry").copied())
            .collect();
        let expected: Vec<ItemId> = order.iter().map(|k| list.entries[*k as usize].item).collect();
        assert_eq!(visited, expected);
        assert_eq!(visited.len(), list.entries.len());
    }

    #[test]
    fn runs_are_deterministic() {
        let f = fixture();
        let mut cfg = RunConfig::default();
        cfg.nav.drift.odom_noise = 0.01;
        cfg.faults.detection_miss_rate = 0.3;
        let list = generate_shopping_list(&f.store, 12).unwrap();
        let a = run_task(art(f), &list, &cfg, 12).unwrap().to_jsonl();
        let b = run_task(art(f), &list, &cfg, 12).unwrap().to_jsonl();
        assert_eq!(a, b);
    }

    #[test]
    fn log_round_trips() {
        let f = fixture();
        let list = generate_shopping_list(&f.store, 13).unwrap();
        let log = run_task(art(f), &list, &RunConfig::default(), 13).unwrap();
        let text = log.to_jsonl();
        assert_eq!(RunLog::from_jsonl(&text).unwrap(), log);
        let bumped = text.replacen("\"version\":1", "\"version\":9", 1);
        assert!(matches!(RunLog::from_jsonl(&bumped), Err(LogError::Version { version: 9, .. })));
        let cut: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
        assert!(matches!(RunLog::from_jsonl(&cut), Err(LogError::Malformed(_))));
    }

    #[test]
    fn unknown_item_is_a_config_error() {
        let f = fixture();
        let mut list = generate_shopping_list(&f.store, 14).unwrap();
        list.entries[3] = ListEntry { item: ItemId(999_999), instances: 1 };
        assert!(matches!(run_task(art(f), &list, &RunConfig::ideal(), 1), Err(ConfigError::UnknownItem(ItemId(999_999)))));
    }

    #[test]
    fn bad_probability_is_rejected() {
        let f = fixture();
        let mut cfg = RunConfig::ideal();
        cfg.faults.collision_rate = 1.5;
        assert!(matches!(Executor::new(art(f), cfg), Err(ConfigError::Probability { field: "collision_rate", .. })));
    }

    #[test]
    fn campaign_budget_and_workers() {
        let f = fixture();
        let ex = Executor::new(art(f), RunConfig::ideal()).unwrap();
        let one = run_campaign(&ex, 3, 21, Some(1.0), 2).unwrap();
        assert_eq!(one.len(), 1);
        let serial = run_campaign(&ex, 3, 21, None, 1).unwrap();
        let parallel = run_campaign(&ex, 3, 21, None, 3).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.iter().map(|l| l.seed).collect::<Vec<_>>(), run_seeds(21, 3));
        assert!(run_campaign(&ex, 0, 21, None, 1).is_err());
    }
}
