use std::collections::BTreeMap;
use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use shopbot_core::drm::{joint_distance, shortcut, JointPath};
use shopbot_core::geometry::{Isometry, Mat3, Vec3};
use shopbot_core::grasp::{
    classify_extraction, classify_grasp, grasp_pose, plan_grasp, select_instance, simulate_grasp_outcome, verify_grasp, Detection,
    GraspSimParams, GraspType, TOOL_STANDOFF,
};
use shopbot_core::kinematics::{presets, IkParams};
use shopbot_core::metrics::chained_reliability;
use shopbot_core::nav::{grid_plan, plan_tour, tour_cost};
use shopbot_core::worldmodel::{GridSpec2, ItemAttributes, ItemId, ItemRecord, OccupancyGrid, VoxelIndex};
use shopbot_core::{RobotModel, VoxelMap};

fn arm() -> RobotModel {
    presets::desk_arm().build().unwrap()
}

fn config(m: &RobotModel, u: &[f64]) -> Vec<f64> {
    m.limits().iter().zip(u).map(|([lo, hi], t)| lo + t * (hi - lo)).collect()
}

fn point() -> impl Strategy<Value = [f64; 3]> {
    prop::array::uniform3(-1.0..1.0f64)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn voxel_statistics_match_recomputation(pts in prop::collection::vec(point(), 1..60), res in 0.05..0.5f64) {
        let mut map = VoxelMap::new(res, Vec3::zeros()).unwrap();
        let batch: Vec<_> = pts.iter().map(|p| (Vec3::from_array(*p), [0.0; 3])).collect();
        map.insert(&batch).unwrap();
        let mut groups: BTreeMap<VoxelIndex, Vec<[f64; 3]>> = BTreeMap::new();
        for p in &pts {
            groups.entry(map.index_of(Vec3::from_array(*p))).or_default().push(*p);
        }
        prop_assert_eq!(map.len(), groups.len());
        for (idx, members) in &groups {
            let cell = map.cell(*idx).unwrap();
            let n = members.len() as f64;
            prop_assert_eq!(cell.count, members.len() as u64);
            let second = cell.second_moment();
            for a in 0..3 {
                let mean = members.iter().map(|p| p[a]).sum::<f64>() / n;
                prop_assert!((cell.mean.to_array()[a] - mean).abs() < 1e-9);
                for b in 0..3 {
                    let m2 = members.iter().map(|p| p[a] * p[b]).sum::<f64>() / n;
                    let got = second.mul_vec(unit(b)).to_array()[a];
                    prop_assert!((got - m2).abs() < 1e-9, "moment ({a},{b}): {got} vs {m2}");
                }
            }
        }
        // same points, same order: same map
        let mut again = VoxelMap::new(res, Vec3::zeros()).unwrap();
        again.insert(&batch).unwrap();
        prop_assert_eq!(again, map);
    }

    #[test]
    fn fk_rotations_are_orthonormal(u in prop::collection::vec(0.0..1.0f64, 12)) {
        for m in [arm(), presets::whole_body().build().unwrap()] {
            let q = config(&m, &u);
            let kin = m.forward_kinematics(&q).unwrap();
            prop_assert_eq!(&kin.tool, &m.forward_kinematics(&q).unwrap().tool);
            for pose in kin.link_poses.iter().chain([&kin.tool]) {
                let r = pose.rotation;
                prop_assert!(r.transpose().mul_mat(&r).max_abs_diff(&Mat3::identity()) < 1e-9);
                prop_assert!((r.determinant() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn ik_successes_meet_their_postcondition(u in prop::collection::vec(0.0..1.0f64, 4), s in prop::collection::vec(0.0..1.0f64, 4)) {
        let m = arm();
        let target = m.tool_pose(&config(&m, &u)).unwrap();
        let params = IkParams::default();
        if let Ok(q) = m.solve_ik(&target, &config(&m, &s), &params) {
            prop_assert!(m.within_limits(&q));
            let tool = m.tool_pose(&q).unwrap();
            prop_assert!((tool.translation - target.translation).norm() <= params.pos_tol);
            prop_assert!(tool.rotation.angle_to(&target.rotation) <= params.rot_tol * 1.01);
        }
    }

    #[test]
    fn robot_voxels_cover_the_spheres(u in prop::collection::vec(0.0..1.0f64, 4), w in prop::array::uniform3(-1.0..1.0f64), res in 0.03..0.2f64) {
        let m = arm();
        let q = config(&m, &u);
        let vox = m.robot_voxels(&q, Vec3::zeros(), res).unwrap();
        let kin = m.forward_kinematics(&q).unwrap();
        let dir = Vec3::from_array(w);
        for s in m.placed_spheres(&kin) {
            // a point strictly inside the sphere along a random direction
            let p = s.center + dir * (0.999 * s.radius / 3f64.sqrt());
            let idx = VoxelMap::new(res, Vec3::zeros()).unwrap().index_of(p);
            prop_assert!(vox.contains(&idx), "{p:?} not covered");
        }
    }

    #[test]
    fn shortcut_shortens_and_keeps_endpoints(
        pts in prop::collection::vec(prop::array::uniform2(-2.0..2.0f64), 2..12),
        seed in any::<u64>(),
    ) {
        let path = JointPath::new(pts.iter().map(|p| p.to_vec()).collect());
        // a disc in joint space stands in for an obstacle
        let free = |a: &[f64], b: &[f64]| (0..=20).all(|k| {
            let t = k as f64 / 20.0;
            let x = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            (x[0] - 0.1).hypot(x[1] + 0.2) > 0.5
        });
        let valid_before = path.waypoints.windows(2).all(|w| free(&w[0], &w[1]));
        let out = shortcut(&path, &free, 50, seed);
        prop_assert!(out.length <= path.length + 1e-12);
        prop_assert_eq!(out.waypoints.first(), path.waypoints.first());
        prop_assert_eq!(out.waypoints.last(), path.waypoints.last());
        let len: f64 = out.waypoints.windows(2).map(|w| joint_distance(&w[0], &w[1])).sum();
        prop_assert!((len - out.length).abs() < 1e-9);
        if valid_before {
            prop_assert!(out.waypoints.windows(2).all(|w| free(&w[0], &w[1])));
        }
        prop_assert_eq!(shortcut(&path, &free, 50, seed), out);
    }

    #[test]
    fn grid_paths_stay_on_free_cells(cells in prop::collection::vec(any::<bool>(), 400), s in (0..20usize, 0..20usize), g in (0..20usize, 0..20usize)) {
        let mut grid = OccupancyGrid::free(GridSpec2 { origin: [0.0, 0.0], resolution: 0.1, width: 20, height: 20 });
        for (k, occ) in cells.iter().enumerate() {
            // roughly a third of the cells are blocked
            if *occ && k % 3 == 0 {
                grid.set(k % 20, k / 20, true);
            }
        }
        grid.set(s.0, s.1, false);
        grid.set(g.0, g.1, false);
        if let Ok(path) = grid_plan(&grid, s, g) {
            for w in &path.waypoints {
                prop_assert!(!grid.is_occupied_at(w[0], w[1]), "waypoint {w:?} on an occupied cell");
            }
            prop_assert!((path.cost - path.exact_cost.value() * 0.1).abs() < 1e-9);
        }
    }

    #[test]
    fn tours_visit_everything_once(pts in prop::collection::vec(prop::array::uniform2(0.0..10.0f64), 2..14), start_pick in any::<prop::sample::Index>()) {
        let n = pts.len();
        let costs: Vec<Vec<f64>> = pts.iter().map(|a| pts.iter().map(|b| (a[0] - b[0]).hypot(a[1] - b[1])).collect()).collect();
        let start = start_pick.index(n);
        let tour = plan_tour(&costs, start).unwrap();
        let mut seen = tour.order.clone();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(tour.order[0], start);
        prop_assert!(tour.closed);
        prop_assert!((tour_cost(&costs, &tour.order) - tour.cost).abs() < 1e-9);
    }

    #[test]
    fn classification_is_total_and_grasp_poses_stay_near_the_item(
        dims in prop::array::uniform3(0.02..0.4f64),
        mass in 0.05..5.0f64,
        pose in (prop::array::uniform3(-5.0..5.0f64), -PI..PI),
        flags in prop::array::uniform9(any::<bool>()),
        anchor in prop::array::uniform3(0.0..1.0f64),
    ) {
        let attributes = ItemAttributes {
            has_handle: flags[0], has_cap: flags[1], deformable: flags[2], hangs_on_hook: flags[3], in_box: flags[4],
            rigid_packaging: flags[5], glass: flags[6], refrigerated: flags[7], produce: flags[8],
        };
        let (p, yaw) = pose;
        let item = ItemRecord {
            id: ItemId(1),
            dims,
            mass,
            pose: [p[0], p[1], p[2], yaw],
            outward_axis: [yaw.cos(), yaw.sin()],
            attributes,
            in_stock: 1,
            handle_anchor: flags[0].then(|| [(anchor[0] - 0.5) * dims[0], (anchor[1] - 0.5) * dims[1], anchor[2] * dims[2]]),
            grasp_type: None,
            extraction_type: None,
        };
        let g = classify_grasp(&item);
        prop_assert_eq!(g, classify_grasp(&item));
        prop_assert_eq!(classify_extraction(&item), classify_extraction(&item));
        let pose = grasp_pose(&item, g).unwrap();
        let local = item.frame().inverse().transform_point(pose.translation).to_array();
        let m = TOOL_STANDOFF + 1e-9;
        prop_assert!(local[0].abs() <= dims[0] / 2.0 + m && local[1].abs() <= dims[1] / 2.0 + m);
        prop_assert!(local[2] >= -m && local[2] <= dims[2] + m);

        // simulated signals verify as the outcome they came from
        let plan = plan_grasp(&item).unwrap();
        for prob in [0.0, 1.0] {
            let params = GraspSimParams::uniform(prob);
            let out = simulate_grasp_outcome(&plan, &item, &params, &mut ChaCha8Rng::seed_from_u64(0));
            prop_assert_eq!(out.success, prob == 1.0);
            let verdict = verify_grasp(&out.signals, plan.tool, item.weight_newton(), &params.thresholds).unwrap();
            prop_assert_eq!(verdict, out.success, "{:?}", GraspType::ALL);
        }
    }

    #[test]
    fn instance_choice_ignores_input_order(
        dets in prop::collection::vec((prop::array::uniform3(0.0..0.3f64), any::<bool>()), 1..8),
        perm_seed in any::<u64>(),
    ) {
        let dets: Vec<Detection> = dets.into_iter().map(|(position, occluded)| Detection { position, visibility: 1.0, occluded }).collect();
        let chosen = dets[select_instance(&dets).unwrap()];
        let mut shuffled = dets.clone();
        rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut ChaCha8Rng::seed_from_u64(perm_seed));
        prop_assert_eq!(shuffled[select_instance(&shuffled).unwrap()], chosen);
    }

    #[test]
    fn chained_reliability_decreases(r in 0.3..0.9999f64, n in 0u64..500) {
        let a = chained_reliability(r, n).unwrap();
        let b = chained_reliability(r, n + 1).unwrap();
        prop_assert!(b < a && (0.0..=1.0).contains(&b));
    }
}

fn unit(i: usize) -> Vec3<f64> {
    [Vec3::unit_x(), Vec3::unit_y(), Vec3::unit_z()][i]
}

#[test]
fn full_turn_joints_reach_targets_across_the_seam() {
    let m: RobotModel = presets::planar_2r(1.0, 1.0, 0.05).build().unwrap();
    // the shortest way from the seed crosses q1 = pi
    let target = Isometry::from_translation(Vec3::new(-1.5, -0.2, 0.0));
    let params = IkParams { pos_tol: 1e-7, position_only: true, ..IkParams::default() };
    let q = m.solve_ik(&target, &[3.0, 0.4], &params).unwrap();
    assert!(m.within_limits(&q));
    assert!((m.tool_pose(&q).unwrap().translation - target.translation).norm() < 1e-6);
}
