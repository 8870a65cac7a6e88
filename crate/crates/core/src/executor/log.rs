//! Run logs, serialized as line-delimited JSON: a header line, one line per
//! event, and a footer line with the outcome.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::fsm::TaskState;
use crate::worldmodel::{ItemId, ShoppingList};

pub const LOG_FORMAT: &str = "shopbot-runlog";
pub const LOG_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Entered,
    Succeeded,
    /// `cause` is a failure-taxonomy category, `detail` a free-form reason.
    Failed { cause: String, detail: String },
    Retried { detail: String },
    Skipped { reason: String },
    Estop { cause: String },
}

impl EventKind {
    pub fn is_terminal(&self) -> bool {
        !matches!(self, EventKind::Entered)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvent {
    pub sim_time: f64,
    pub state: TaskState,
    #[serde(flatten)]
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub item: Option<ItemId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub payload: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    Fault { cause: String },
    Estop { cause: String },
}

impl Outcome {
    pub fn is_completed(&self) -> bool {
        matches!(self, Outcome::Completed)
    }

    /// Taxonomy category of a non-completed run.
    pub fn cause(&self) -> Option<&str> {
        match self {
            Outcome::Completed => None,
            Outcome::Fault { cause } | Outcome::Estop { cause } => Some(cause),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub seed: u64,
    pub list: ShoppingList,
    pub events: Vec<TaskEvent>,
    pub outcome: Outcome,
    /// One entry per retrieved instance, in retrieval order.
    pub items_retrieved: Vec<ItemId>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "line", rename_all = "snake_case")]
enum LogLine {
    Header { format: String, version: u32, seed: u64, list: ShoppingList },
    Event(TaskEvent),
    Footer { #[serde(flatten)] outcome: Outcome, items_retrieved: Vec<ItemId> },
}

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported log format {format} version {version}")]
    Version { format: String, version: u32 },
    #[error("malformed log: {0}")]
    Malformed(String),
}

impl RunLog {
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |l: &LogLine| {
            out.push_str(&serde_json::to_string(l).expect("log lines serialize"));
            out.push('\n');
        };
        push(&LogLine::Header { format: LOG_FORMAT.into(), version: LOG_VERSION, seed: self.seed, list: self.list.clone() });
        for e in &self.events {
            push(&LogLine::Event(e.clone()));
        }
        push(&LogLine::Footer { outcome: self.outcome.clone(), items_retrieved: self.items_retrieved.clone() });
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, LogError> {
        let mut header = None;
        let mut events = Vec::new();
        let mut footer = None;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let parsed: LogLine = serde_json::from_str(line).map_err(|e| LogError::Parse { line: i + 1, msg: e.to_string() })?;
            if footer.is_some() {
                return Err(LogError::Malformed("content after footer".into()));
            }
            match parsed {
                LogLine::Header { format, version, seed, list } => {
                    if header.is_some() || !events.is_empty() {
                        return Err(LogError::Malformed("header is not the first line".into()));
                    }
                    if format != LOG_FORMAT || version != LOG_VERSION {
                        return Err(LogError::Version { format, version });
                    }
                    header = Some((seed, list));
                }
                LogLine::Event(e) => {
                    if header.is_none() {
                        return Err(LogError::Malformed("event before header".into()));
                    }
                    events.push(e);
                }
                LogLine::Footer { outcome, items_retrieved } => footer = Some((outcome, items_retrieved)),
            }
        }
        let (seed, list) = header.ok_or_else(|| LogError::Malformed("missing header".into()))?;
        let (outcome, items_retrieved) = footer.ok_or_else(|| LogError::Malformed("missing footer".into()))?;
        Ok(Self { seed, list, events, outcome, items_retrieved })
    }

    /// Total simulated duration of the run, s.
    pub fn duration(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.sim_time)
    }

    /// Retrieved instances, counted from the event stream: a successful
    /// verification followed by a successful placement of the same item.
    pub fn retrieved_from_events(&self) -> Vec<ItemId> {
        use super::fsm::ItemState;
        let mut verified: Option<ItemId> = None;
        let mut out = Vec::new();
        for e in &self.events {
            match (&e.state, &e.kind) {
                (TaskState::ItemLoop(ItemState::VerifyGrasp), EventKind::Succeeded) => verified = e.item,
                (TaskState::ItemLoop(ItemState::Place), EventKind::Succeeded) => {
                    if let (Some(v), Some(it)) = (verified.take(), e.item) {
                        if v == it {
                            out.push(it);
                        }
                    }
                }
                (TaskState::ItemLoop(ItemState::VerifyGrasp), _) => verified = None,
                _ => {}
            }
        }
        out
    }

    /// Checks that consecutive states are joined by edges of the transition
    /// table and that the outcome matches the final state.
    pub fn check_transitions(&self) -> Result<(), LogError> {
        use super::fsm::{step_fsm, FsmEvent};
        const EVENTS: [FsmEvent; 19] = [
            FsmEvent::Begin,
            FsmEvent::Localized,
            FsmEvent::TourPlanned,
            FsmEvent::ItemsRemaining,
            FsmEvent::ListExhausted,
            FsmEvent::Arrived,
            FsmEvent::Relocalized,
            FsmEvent::Detected,
            FsmEvent::GraspPlanned,
            FsmEvent::MotionPlanned,
            FsmEvent::Executed,
            FsmEvent::Verified,
            FsmEvent::InstancesRemaining,
            FsmEvent::ItemDone,
            FsmEvent::HomeReached,
            FsmEvent::Retry,
            FsmEvent::GiveUp,
            FsmEvent::Fault,
            FsmEvent::EStop,
        ];
        let legal = |from: TaskState, to: TaskState| EVENTS.iter().any(|e| step_fsm(from, *e).is_ok_and(|(n, _)| n == to));
        let mut prev = TaskState::Start;
        for e in self.events.iter().filter(|e| e.kind == EventKind::Entered) {
            if !legal(prev, e.state) {
                return Err(LogError::Malformed(format!("no edge from {prev:?} to {:?}", e.state)));
            }
            prev = e.state;
        }
        let last = self.events.last().ok_or_else(|| LogError::Malformed("empty event list".into()))?;
        let ok = match (&self.outcome, &last.kind) {
            (Outcome::Completed, EventKind::Succeeded) => last.state == TaskState::ReturnHome,
            (Outcome::Fault { cause }, EventKind::Failed { cause: c, .. }) => cause == c,
            (Outcome::Estop { cause }, EventKind::Estop { cause: c }) => cause == c,
            _ => false,
        };
        if !ok {
            return Err(LogError::Malformed(format!("outcome {:?} does not match the last event", self.outcome)));
        }
        Ok(())
    }

    /// Checks monotone time, balanced entered/terminal pairs, and agreement
    /// of the retrieved list with the events.
    pub fn check_well_formed(&self) -> Result<(), LogError> {
        let mut t = f64::NEG_INFINITY;
        let mut open: Option<&TaskState> = None;
        for e in &self.events {
            if !(e.sim_time >= t) {
                return Err(LogError::Malformed(format!("time goes back at {}", e.sim_time)));
            }
            t = e.sim_time;
            match (&e.kind, open) {
                (EventKind::Entered, None) => open = Some(&e.state),
                (EventKind::Entered, Some(s)) => return Err(LogError::Malformed(format!("{s:?} entered twice without terminal"))),
                (k, Some(s)) if k.is_terminal() && *s == e.state => open = None,
                (k, _) => return Err(LogError::Malformed(format!("unpaired {k:?} for {:?}", e.state))),
            }
            if let EventKind::Failed { cause, .. } = &e.kind {
                if cause.is_empty() {
                    return Err(LogError::Malformed("failure without cause".into()));
                }
            }
        }
        if let Some(s) = open {
            return Err(LogError::Malformed(format!("{s:?} never terminated")));
        }
        if self.retrieved_from_events() != self.items_retrieved {
            return Err(LogError::Malformed("retrieved items disagree with events".into()));
        }
        Ok(())
    }
}
