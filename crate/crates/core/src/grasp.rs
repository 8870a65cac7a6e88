//! Grasp and extraction strategy selection, grasp poses, and the simulated
//! grasp outcome together with its verification from tool signals.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{Isometry, Mat3, Vec3};
use crate::worldmodel::{ItemRecord, StoreModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GraspType {
    FlatCylindricalPinch,
    CapGrasp,
    HandleGrasp,
    HeavyDeformableGrasp,
    SuctionGrasp,
}

impl GraspType {
    pub const ALL: [GraspType; 5] = [
        GraspType::FlatCylindricalPinch,
        GraspType::CapGrasp,
        GraspType::HandleGrasp,
        GraspType::HeavyDeformableGrasp,
        GraspType::SuctionGrasp,
    ];

    pub fn tool(self) -> Tool {
        match self {
            GraspType::SuctionGrasp | GraspType::HeavyDeformableGrasp => Tool::Suction,
            _ => Tool::ParallelJaw,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExtractionType {
    LipFreeShelf,
    Jug,
    Box,
    Hook,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tool {
    ParallelJaw,
    Suction,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GraspError {
    #[error("no instance detected")]
    NoInstance,
    #[error("grasp plan infeasible: {0}")]
    PlanInfeasible(&'static str),
    #[error("missing {0} signal")]
    SignalError(&'static str),
}

/// Thresholds of the rule-based classifiers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspRules {
    /// Deformable items heavier than this use the heavy-deformable grasp, kg.
    pub heavy_deformable_mass: f64,
    /// Handled items heavier than this are extracted as jugs, kg.
    pub jug_mass: f64,
    /// Smallest side of a face the suction cup can seal on, m.
    pub suction_min_face_side: f64,
}

impl Default for GraspRules {
    fn default() -> Self {
        Self { heavy_deformable_mass: 1.5, jug_mass: 2.0, suction_min_face_side: 0.03 }
    }
}

pub fn classify_grasp(item: &ItemRecord) -> GraspType {
    classify_grasp_with(item, &GraspRules::default())
}

pub fn classify_grasp_with(item: &ItemRecord, rules: &GraspRules) -> GraspType {
    let a = &item.attributes;
    if a.has_handle {
        GraspType::HandleGrasp
    } else if a.deformable && item.mass > rules.heavy_deformable_mass {
        GraspType::HeavyDeformableGrasp
    } else if a.has_cap {
        GraspType::CapGrasp
    } else if a.rigid_packaging && has_suction_face(item, rules) {
        GraspType::SuctionGrasp
    } else {
        GraspType::FlatCylindricalPinch
    }
}

fn has_suction_face(item: &ItemRecord, rules: &GraspRules) -> bool {
    let [dx, dy, dz] = item.dims;
    let s = rules.suction_min_face_side;
    dz >= s && (dx >= s || dy >= s)
}

pub fn classify_extraction(item: &ItemRecord) -> ExtractionType {
    classify_extraction_with(item, &GraspRules::default())
}

pub fn classify_extraction_with(item: &ItemRecord, rules: &GraspRules) -> ExtractionType {
    let a = &item.attributes;
    if a.hangs_on_hook {
        ExtractionType::Hook
    } else if a.in_box {
        ExtractionType::Box
    } else if a.has_handle && item.mass > rules.jug_mass {
        ExtractionType::Jug
    } else {
        ExtractionType::LipFreeShelf
    }
}

/// Fills the cached classification of every catalog item.
pub fn classify_catalog(store: &mut StoreModel) {
    for item in &mut store.items {
        item.grasp_type = Some(classify_grasp(item));
        item.extraction_type = Some(classify_extraction(item));
    }
}

/// One detected instance. `position` is expressed in a shelf-front frame:
/// x is the depth behind the shelf front, y grows to the right, z is up.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub position: [f64; 3],
    pub visibility: f64,
    pub occluded: bool,
}

/// Picks the unoccluded instance closest to the shelf front, breaking ties by
/// the leftmost position and then by list order. When every instance is
/// occluded the same ordering applies to all of them.
pub fn select_instance(detections: &[Detection]) -> Result<usize, GraspError> {
    if detections.is_empty() {
        return Err(GraspError::NoInstance);
    }
    let any_clear = detections.iter().any(|d| !d.occluded);
    detections
        .iter()
        .enumerate()
        .filter(|(_, d)| !any_clear || !d.occluded)
        .min_by(|(i, a), (j, b)| {
            a.position[0]
                .total_cmp(&b.position[0])
                .then(a.position[1].total_cmp(&b.position[1]))
                .then(i.cmp(j))
        })
        .map(|(i, _)| i)
        .ok_or(GraspError::NoInstance)
}

/// Width of a handle the parallel jaw closes on, m.
pub const HANDLE_WIDTH: f64 = 0.03;
/// Allowed distance of a grasp pose outside the item bounding box, m.
pub const TOOL_STANDOFF: f64 = 0.02;

/// Tool frame with z pointing along `approach` (into the item) and y up.
fn approach_frame(position: Vec3<f64>, approach: Vec3<f64>) -> Isometry<f64> {
    let z = approach.normalized().unwrap_or(Vec3::unit_x());
    let y = Vec3::unit_z();
    let x = y.cross(z);
    Isometry::new(Mat3::from_columns(x, y, z), position)
}

fn outward3(item: &ItemRecord) -> Vec3<f64> {
    Vec3::new(item.outward_axis[0], item.outward_axis[1], 0.0)
}

/// Center and outward normal of the largest lateral face that faces the aisle.
fn largest_exposed_face(item: &ItemRecord) -> (Vec3<f64>, Vec3<f64>) {
    let frame = item.frame();
    let out = outward3(item);
    let center = item.center();
    let [dx, dy, dz] = item.dims;
    let faces = [
        (Vec3::unit_x(), dx / 2.0, dy * dz),
        (-Vec3::unit_x(), dx / 2.0, dy * dz),
        (Vec3::unit_y(), dy / 2.0, dx * dz),
        (-Vec3::unit_y(), dy / 2.0, dx * dz),
    ];
    let mut best: Option<(f64, f64, Vec3<f64>, f64)> = None;
    for (n_local, half, area) in faces {
        let n = frame.transform_vector(n_local);
        let facing = n.dot(out);
        if facing <= 1e-6 {
            continue;
        }
        let better = match best {
            None => true,
            Some((a, f, _, _)) => area > a + 1e-12 || ((area - a).abs() <= 1e-12 && facing > f),
        };
        if better {
            best = Some((area, facing, n, half));
        }
    }
    let (_, _, n, half) = best.unwrap_or((0.0, 0.0, out, dx / 2.0));
    (center + n * half, n)
}

/// Tool pose for `grasp` on `item`, store frame.
pub fn grasp_pose(item: &ItemRecord, grasp: GraspType) -> Result<Isometry<f64>, GraspError> {
    let into = -outward3(item);
    match grasp {
        GraspType::SuctionGrasp | GraspType::HeavyDeformableGrasp => {
            let (p, n) = largest_exposed_face(item);
            Ok(approach_frame(p, -n))
        }
        GraspType::FlatCylindricalPinch => Ok(approach_frame(item.center(), into)),
        GraspType::CapGrasp => {
            let top = item.frame().transform_point(Vec3::new(0.0, 0.0, item.dims[2]));
            Ok(approach_frame(top, into))
        }
        GraspType::HandleGrasp => {
            let anchor = item.handle_anchor.ok_or(GraspError::PlanInfeasible("item has no handle anchor"))?;
            let [dx, dy, dz] = item.dims;
            let m = TOOL_STANDOFF;
            let inside = anchor[0].abs() <= dx / 2.0 + m && anchor[1].abs() <= dy / 2.0 + m && anchor[2] >= -m && anchor[2] <= dz + m;
            if !inside {
                return Err(GraspError::PlanInfeasible("handle anchor outside the item"));
            }
            Ok(approach_frame(item.frame().transform_point(Vec3::from_array(anchor)), into))
        }
    }
}

/// Width the parallel jaw closes to when holding the item.
pub fn grasp_width(item: &ItemRecord, grasp: GraspType) -> f64 {
    let horiz = item.dims[0].min(item.dims[1]);
    match grasp {
        GraspType::HandleGrasp => HANDLE_WIDTH,
        GraspType::CapGrasp => 0.6 * horiz,
        _ => horiz,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspPlan {
    pub grasp_type: GraspType,
    pub extraction_type: ExtractionType,
    pub tool: Tool,
    pub tool_pose: Isometry<f64>,
    /// The item's outward axis; the tool travels against it into the shelf.
    pub approach_axis: Vec3<f64>,
}

/// Builds the full plan, using the cached classification when present.
pub fn plan_grasp(item: &ItemRecord) -> Result<GraspPlan, GraspError> {
    let grasp_type = item.grasp_type.unwrap_or_else(|| classify_grasp(item));
    let extraction_type = item.extraction_type.unwrap_or_else(|| classify_extraction(item));
    Ok(GraspPlan {
        grasp_type,
        extraction_type,
        tool: grasp_type.tool(),
        tool_pose: grasp_pose(item, grasp_type)?,
        approach_axis: outward3(item),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspSignals {
    pub finger_gap: Option<f64>,
    /// Suction line pressure, kPa absolute.
    pub pressure: Option<f64>,
    /// Force magnitude at the tool tip, N.
    pub tip_wrench: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspOutcome {
    pub success: bool,
    pub signals: GraspSignals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SignalThresholds {
    /// Finger gaps at or below this mean the jaw closed on nothing, m.
    pub finger_closed: f64,
    /// Pressures at or below this mean the cup sealed, kPa.
    pub seal_pressure: f64,
    pub sealed_pressure: f64,
    pub ambient_pressure: f64,
    /// Fraction of the item weight the tip wrench must reach.
    pub wrench_fraction: f64,
}

impl Default for SignalThresholds {
    fn default() -> Self {
        Self { finger_closed: 0.005, seal_pressure: 60.0, sealed_pressure: 30.0, ambient_pressure: 101.3, wrench_fraction: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspSimParams {
    /// Success probability per grasp type. Simulation knobs, not measured values.
    pub success_probability: BTreeMap<GraspType, f64>,
    pub thresholds: SignalThresholds,
}

impl Default for GraspSimParams {
    fn default() -> Self {
        Self::uniform(0.8)
    }
}

impl GraspSimParams {
    pub fn uniform(p: f64) -> Self {
        Self { success_probability: GraspType::ALL.iter().map(|g| (*g, p)).collect(), thresholds: SignalThresholds::default() }
    }

    pub fn probability(&self, g: GraspType) -> f64 {
        self.success_probability.get(&g).copied().unwrap_or(0.8).clamp(0.0, 1.0)
    }
}

/// Samples a grasp outcome and the tool signals it would produce.
pub fn simulate_grasp_outcome(plan: &GraspPlan, item: &ItemRecord, params: &GraspSimParams, rng: &mut impl Rng) -> GraspOutcome {
    let p = params.probability(plan.grasp_type);
    let success = p >= 1.0 || (p > 0.0 && rng.random::<f64>() < p);
    let th = &params.thresholds;
    let signals = match (plan.tool, success) {
        (Tool::ParallelJaw, true) => GraspSignals {
            finger_gap: Some(grasp_width(item, plan.grasp_type)),
            pressure: None,
            tip_wrench: item.weight_newton(),
        },
        (Tool::ParallelJaw, false) => GraspSignals { finger_gap: Some(0.0), pressure: None, tip_wrench: 0.0 },
        (Tool::Suction, true) => GraspSignals { finger_gap: None, pressure: Some(th.sealed_pressure), tip_wrench: item.weight_newton() },
        (Tool::Suction, false) => GraspSignals { finger_gap: None, pressure: Some(th.ambient_pressure), tip_wrench: 0.0 },
    };
    GraspOutcome { success, signals }
}

/// Decides from tool signals whether the item is held.
pub fn verify_grasp(signals: &GraspSignals, tool: Tool, item_weight: f64, th: &SignalThresholds) -> Result<bool, GraspError> {
    let wrench_ok = signals.tip_wrench.abs() >= th.wrench_fraction * item_weight;
    match tool {
        Tool::ParallelJaw => {
            let gap = signals.finger_gap.ok_or(GraspError::SignalError("finger gap"))?;
            Ok(gap > th.finger_closed && wrench_ok)
        }
        Tool::Suction => {
            let p = signals.pressure.ok_or(GraspError::SignalError("pressure"))?;
            Ok(p <= th.seal_pressure && wrench_ok)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::worldmodel::{ItemAttributes, ItemId};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn item(dims: [f64; 3], attributes: ItemAttributes, mass: f64) -> ItemRecord {
        ItemRecord {
            id: ItemId(1),
            dims,
            mass,
            pose: [0.0, 0.0, 0.0, 0.0],
            outward_axis: [1.0, 0.0],
            attributes,
            in_stock: 1,
            handle_anchor: None,
            grasp_type: None,
            extraction_type: None,
        }
    }

    #[test]
    fn classification_rules() {
        let handle = item([0.1; 3], ItemAttributes { has_handle: true, ..Default::default() }, 1.0);
        assert_eq!(classify_grasp(&handle), GraspType::HandleGrasp);
        let bag = item([0.2; 3], ItemAttributes { deformable: true, ..Default::default() }, 2.0);
        assert_eq!(classify_grasp(&bag), GraspType::HeavyDeformableGrasp);
        let light_bag = item([0.2; 3], ItemAttributes { deformable: true, ..Default::default() }, 1.0);
        assert_eq!(classify_grasp(&light_bag), GraspType::FlatCylindricalPinch);
        let boxy = item([0.05, 0.05, 0.1], ItemAttributes { rigid_packaging: true, ..Default::default() }, 0.2);
        assert_eq!(classify_grasp(&boxy), GraspType::SuctionGrasp);
        let tiny = item([0.02, 0.02, 0.1], ItemAttributes { rigid_packaging: true, ..Default::default() }, 0.2);
        assert_eq!(classify_grasp(&tiny), GraspType::FlatCylindricalPinch);
    }

    #[test]
    fn extraction_rules() {
        let hook = item([0.1; 3], ItemAttributes { hangs_on_hook: true, in_box: true, ..Default::default() }, 1.0);
        assert_eq!(classify_extraction(&hook), ExtractionType::Hook);
        let boxed = item([0.1; 3], ItemAttributes { in_box: true, ..Default::default() }, 1.0);
        assert_eq!(classify_extraction(&boxed), ExtractionType::Box);
        let jug = item([0.1; 3], ItemAttributes { has_handle: true, ..Default::default() }, 3.0);
        assert_eq!(classify_extraction(&jug), ExtractionType::Jug);
        assert_eq!(classify_extraction(&item([0.1; 3], Default::default(), 3.0)), ExtractionType::LipFreeShelf);
    }

    #[test]
    fn suction_pose_on_largest_face() {
        let it = item([0.1, 0.2, 0.3], ItemAttributes { rigid_packaging: true, ..Default::default() }, 0.5);
        let p = grasp_pose(&it, GraspType::SuctionGrasp).unwrap();
        assert!((p.translation - Vec3::new(0.05, 0.0, 0.15)).norm() < 1e-12);
        assert!((p.rotation.column(2) - Vec3::new(-1.0, 0.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn cap_and_handle_poses() {
        let bottle = item([0.08, 0.08, 0.25], ItemAttributes { has_cap: true, ..Default::default() }, 0.5);
        assert!((grasp_pose(&bottle, GraspType::CapGrasp).unwrap().translation.z - 0.25).abs() < 1e-12);
        assert_eq!(grasp_pose(&bottle, GraspType::HandleGrasp), Err(GraspError::PlanInfeasible("item has no handle anchor")));
    }

    #[test]
    fn instance_selection() {
        let d = |x: f64, y: f64, occ: bool| Detection { position: [x, y, 0.0], visibility: 1.0, occluded: occ };
        assert_eq!(select_instance(&[d(0.1, 0.0, false)]), Ok(0));
        assert_eq!(select_instance(&[d(0.3, 0.0, false), d(0.1, 0.0, false)]), Ok(1));
        assert_eq!(select_instance(&[d(0.1, 0.2, false), d(0.1, -0.2, false)]), Ok(1));
        assert_eq!(select_instance(&[d(0.05, 0.0, true), d(0.2, 0.0, false)]), Ok(1));
        assert_eq!(select_instance(&[]), Err(GraspError::NoInstance));
    }

    #[test]
    fn outcome_probability_extremes_and_round_trip() {
        let it = item([0.1, 0.2, 0.3], ItemAttributes { rigid_packaging: true, ..Default::default() }, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for g in GraspType::ALL {
            let mut it = it.clone();
            it.handle_anchor = Some([0.0, 0.0, 0.2]);
            let plan = GraspPlan {
                grasp_type: g,
                extraction_type: ExtractionType::LipFreeShelf,
                tool: g.tool(),
                tool_pose: grasp_pose(&it, g).unwrap(),
                approach_axis: Vec3::unit_x(),
            };
            let th = SignalThresholds::default();
            let ok = simulate_grasp_outcome(&plan, &it, &GraspSimParams::uniform(1.0), &mut rng);
            assert!(ok.success);
            assert!(verify_grasp(&ok.signals, plan.tool, it.weight_newton(), &th).unwrap());
            let bad = simulate_grasp_outcome(&plan, &it, &GraspSimParams::uniform(0.0), &mut rng);
            assert!(!bad.success);
            assert!(!verify_grasp(&bad.signals, plan.tool, it.weight_newton(), &th).unwrap());
        }
    }

    #[test]
    fn verification_signals() {
        let th = SignalThresholds::default();
        let closed = GraspSignals { finger_gap: Some(0.0), pressure: None, tip_wrench: 10.0 };
        assert!(!verify_grasp(&closed, Tool::ParallelJaw, 5.0, &th).unwrap());
        let leak = GraspSignals { finger_gap: None, pressure: Some(80.0), tip_wrench: 10.0 };
        assert!(!verify_grasp(&leak, Tool::Suction, 5.0, &th).unwrap());
        assert_eq!(verify_grasp(&leak, Tool::ParallelJaw, 5.0, &th), Err(GraspError::SignalError("finger gap")));
    }
}
