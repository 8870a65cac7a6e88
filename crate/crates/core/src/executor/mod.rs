//! Task execution: the hierarchical state machine, the simulated runner that
//! drives it through a shopping run, campaigns of runs, and run logs.

mod config;
mod fsm;
mod log;
mod run;

pub use config::{ArmConfig, ConfigError, Durations, FaultConfig, NavConfig, RetryLimits, RunConfig};
pub use fsm::{step_fsm, Action, FsmEvent, FsmViolation, ItemState, TaskState};
pub use log::{EventKind, LogError, Outcome, RunLog, TaskEvent, LOG_FORMAT, LOG_VERSION};
pub use run::{cause, run_campaign, run_seeds, run_task, Artifacts, Executor};
