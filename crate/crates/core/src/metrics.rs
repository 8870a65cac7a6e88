//! Campaign metrics recomputed from run logs, failure breakdowns, and
//! chained-reliability arithmetic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::Mul;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::executor::{EventKind, ItemState, Outcome, RunLog, TaskState};
use crate::worldmodel::ItemId;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no run logs given")]
    EmptyInput,
    #[error("failure cause {0:?} is not in the taxonomy")]
    Taxonomy(String),
    #[error("{0}")]
    Domain(&'static str),
}

/// Failure categories accepted in run outcomes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Taxonomy {
    pub categories: BTreeSet<String>,
}

impl Default for Taxonomy {
    fn default() -> Self {
        use crate::executor::cause::*;
        Self { categories: [JOINT_CONTROL, COLLISION, SOFTWARE, ESTOP, OTHER].into_iter().map(String::from).collect() }
    }
}

impl Taxonomy {
    pub fn with(mut self, category: &str) -> Self {
        self.categories.insert(category.to_string());
        self
    }

    pub fn contains(&self, category: &str) -> bool {
        self.categories.contains(category)
    }
}

fn nonempty(logs: &[RunLog]) -> Result<(), MetricsError> {
    if logs.is_empty() {
        Err(MetricsError::EmptyInput)
    } else {
        Ok(())
    }
}

/// Completed runs over started runs.
pub fn task_success_rate(logs: &[RunLog]) -> Result<f64, MetricsError> {
    nonempty(logs)?;
    let completed = logs.iter().filter(|l| l.outcome.is_completed()).count();
    Ok(completed as f64 / logs.len() as f64)
}

/// Instances retrieved in one run, counted from its events.
pub fn retrieved_count(log: &RunLog) -> u32 {
    log.retrieved_from_events().len() as u32
}

/// Retrieved instances over requested instances, pooled over all runs.
/// Out-of-stock entries stay in the denominator.
pub fn shopping_success_rate(logs: &[RunLog]) -> Result<f64, MetricsError> {
    nonempty(logs)?;
    let requested: u64 = logs.iter().map(|l| u64::from(l.list.total_instances())).sum();
    if requested == 0 {
        return Err(MetricsError::Domain("shopping lists request no instances"));
    }
    let retrieved: u64 = logs.iter().map(|l| u64::from(retrieved_count(l))).sum();
    Ok(retrieved as f64 / requested as f64)
}

/// Total simulated time (return leg included) over retrieved instances,
/// pooled. `None` when nothing was retrieved.
pub fn time_per_item(logs: &[RunLog]) -> Result<Option<f64>, MetricsError> {
    nonempty(logs)?;
    let retrieved: u64 = logs.iter().map(|l| u64::from(retrieved_count(l))).sum();
    if retrieved == 0 {
        return Ok(None);
    }
    let total: f64 = logs.iter().map(RunLog::duration).sum();
    Ok(Some(total / retrieved as f64))
}

/// Distinct items with at least one grasp execution started.
pub fn unique_items_attempted(logs: &[RunLog]) -> usize {
    let exec = TaskState::ItemLoop(ItemState::ExecuteGrasp);
    logs.iter()
        .flat_map(|l| l.events.iter())
        .filter(|e| e.state == exec && e.kind == EventKind::Entered)
        .filter_map(|e| e.item)
        .collect::<BTreeSet<ItemId>>()
        .len()
}

/// Non-completed runs counted under their terminal cause.
pub fn failure_breakdown(logs: &[RunLog], taxonomy: &Taxonomy) -> Result<BTreeMap<String, u64>, MetricsError> {
    let mut out = BTreeMap::new();
    for log in logs {
        if let Some(c) = log.outcome.cause() {
            if !taxonomy.contains(c) {
                return Err(MetricsError::Taxonomy(c.to_string()));
            }
            *out.entry(c.to_string()).or_insert(0) += 1;
        }
    }
    Ok(out)
}

fn check_reliability<T: Zero + One + PartialOrd>(r: &T) -> Result<(), MetricsError> {
    if !(*r > T::zero() && *r <= T::one()) {
        return Err(MetricsError::Domain("per-action reliability must lie in (0, 1]"));
    }
    Ok(())
}

/// Probability that `n` independent actions of reliability `r` all succeed.
/// Works for floats and exact rationals alike.
pub fn chained_reliability<T>(r: T, n: u64) -> Result<T, MetricsError>
where
    T: Clone + Zero + One + PartialOrd + Mul<Output = T>,
{
    check_reliability(&r)?;
    // square-and-multiply
    let (mut base, mut e, mut acc) = (r, n, T::one());
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base.clone();
        }
        e >>= 1;
        if e > 0 {
            base = base.clone() * base;
        }
    }
    Ok(acc)
}

/// Smallest `n` with `r^n < threshold`.
pub fn min_actions_below<T>(r: T, threshold: T) -> Result<u64, MetricsError>
where
    T: Clone + Zero + One + PartialOrd + Mul<Output = T>,
{
    check_reliability(&r)?;
    if !(threshold > T::zero() && threshold < T::one()) {
        return Err(MetricsError::Domain("threshold must lie in (0, 1)"));
    }
    if r == T::one() {
        return Err(MetricsError::Domain("a reliability of 1 never drops below the threshold"));
    }
    let mut n = 0u64;
    let mut p = T::one();
    while !(p < threshold) {
        p = p * r.clone();
        n += 1;
    }
    Ok(n)
}

/// One row per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    pub outcome: String,
    pub cause: Option<String>,
    pub requested: u32,
    pub retrieved: u32,
    pub duration_s: f64,
    pub time_per_item_s: Option<f64>,
}

impl RunRow {
    fn from_log(log: &RunLog) -> Self {
        let retrieved = retrieved_count(log);
        let outcome = match &log.outcome {
            Outcome::Completed => "completed",
            Outcome::Fault { .. } => "fault",
            Outcome::Estop { .. } => "estop",
        };
        Self {
            seed: log.seed,
            outcome: outcome.into(),
            cause: log.outcome.cause().map(String::from),
            requested: log.list.total_instances(),
            retrieved,
            duration_s: log.duration(),
            time_per_item_s: (retrieved > 0).then(|| log.duration() / f64::from(retrieved)),
        }
    }
}

pub const TIME_PER_ITEM_NOTE: &str = "time per item divides the total run time, return leg included, by the retrieved instances";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub note: String,
    pub runs_started: u64,
    pub runs_completed: u64,
    pub task_success_rate: f64,
    pub items_requested: u64,
    pub items_retrieved: u64,
    pub shopping_success_rate: f64,
    pub total_time_s: f64,
    pub time_per_item_s: Option<f64>,
    pub unique_items_attempted: u64,
    pub failure_breakdown: BTreeMap<String, u64>,
    pub runs: Vec<RunRow>,
}

impl CampaignReport {
    pub fn from_logs(logs: &[RunLog], taxonomy: &Taxonomy) -> Result<Self, MetricsError> {
        let runs: Vec<RunRow> = logs.iter().map(RunRow::from_log).collect();
        Ok(Self {
            note: TIME_PER_ITEM_NOTE.into(),
            runs_started: logs.len() as u64,
            runs_completed: logs.iter().filter(|l| l.outcome.is_completed()).count() as u64,
            task_success_rate: task_success_rate(logs)?,
            items_requested: runs.iter().map(|r| u64::from(r.requested)).sum(),
            items_retrieved: runs.iter().map(|r| u64::from(r.retrieved)).sum(),
            shopping_success_rate: shopping_success_rate(logs)?,
            total_time_s: logs.iter().map(RunLog::duration).sum(),
            time_per_item_s: time_per_item(logs)?,
            unique_items_attempted: unique_items_attempted(logs) as u64,
            failure_breakdown: failure_breakdown(logs, taxonomy)?,
            runs,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let pct = |v: f64| format!("{:.1}%", 100.0 * v);
        let _ = writeln!(s, "# {}", self.note);
        let _ = writeln!(s, "runs started            {}", self.runs_started);
        let _ = writeln!(s, "runs completed          {}", self.runs_completed);
        let _ = writeln!(s, "task success rate       {}", pct(self.task_success_rate));
        let _ = writeln!(s, "items retrieved         {} / {}", self.items_retrieved, self.items_requested);
        let _ = writeln!(s, "shopping success rate   {}", pct(self.shopping_success_rate));
        let tpi = self.time_per_item_s.map_or("n/a".to_string(), |v| format!("{v:.1} s"));
        let _ = writeln!(s, "time per item           {tpi}");
        let _ = writeln!(s, "unique items attempted  {}", self.unique_items_attempted);
        if self.failure_breakdown.is_empty() {
            let _ = writeln!(s, "failures                none");
        } else {
            let _ = writeln!(s, "failures");
            for (cause, n) in &self.failure_breakdown {
                let _ = writeln!(s, "  {cause:<22}{n}");
            }
        }
        let _ = writeln!(s);
        let _ = writeln!(s, "{:>20}  {:<9}  {:<20}  {:>9}  {:>9}", "seed", "outcome", "cause", "retrieved", "time s");
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{:>20}  {:<9}  {:<20}  {:>4} / {:<2}  {:>9.1}",
                r.seed,
                r.outcome,
                r.cause.as_deref().unwrap_or("-"),
                r.retrieved,
                r.requested,
                r.duration_s
            );
        }
        s
    }

    /// Per-run rows as CSV.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.runs {
            w.serialize(r).expect("rows serialize");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("csv is utf-8")
    }
}
