use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ItemState {
    Navigate,
    Relocalize,
    Detect,
    PlanGrasp,
    PlanMotion,
    ExecuteGrasp,
    VerifyGrasp,
    Place,
    NextItem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskState {
    Start,
    Localize,
    PlanTour,
    ItemLoop(ItemState),
    ReturnHome,
    Done,
    Aborted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FsmEvent {
    Begin,
    Localized,
    TourPlanned,
    ItemsRemaining,
    ListExhausted,
    Arrived,
    Relocalized,
    Detected,
    GraspPlanned,
    MotionPlanned,
    Executed,
    Verified,
    InstancesRemaining,
    ItemDone,
    HomeReached,
    /// Repeat the attempt (detection, motion planning, or a new grasp).
    Retry,
    /// Give up on the current item.
    GiveUp,
    Fault,
    EStop,
}

/// Work the runner performs on entering a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Action {
    Localize,
    PlanTour,
    SelectItem,
    Navigate,
    Relocalize,
    Detect,
    PlanGrasp,
    PlanMotion,
    ExecuteGrasp,
    VerifyGrasp,
    Place,
    ReturnHome,
    Finish,
    Abort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("illegal event {event:?} in state {state:?}")]
pub struct FsmViolation {
    pub state: TaskState,
    pub event: FsmEvent,
}

impl TaskState {
    pub fn is_terminal(self) -> bool {
        matches!(self, TaskState::Done | TaskState::Aborted)
    }

    pub fn action(self) -> Action {
        use ItemState as I;
        match self {
            TaskState::Start => Action::Localize,
            TaskState::Localize => Action::Localize,
            TaskState::PlanTour => Action::PlanTour,
            TaskState::ItemLoop(s) => match s {
                I::Navigate => Action::Navigate,
                I::Relocalize => Action::Relocalize,
                I::Detect => Action::Detect,
                I::PlanGrasp => Action::PlanGrasp,
                I::PlanMotion => Action::PlanMotion,
                I::ExecuteGrasp => Action::ExecuteGrasp,
                I::VerifyGrasp => Action::VerifyGrasp,
                I::Place => Action::Place,
                I::NextItem => Action::SelectItem,
            },
            TaskState::ReturnHome => Action::ReturnHome,
            TaskState::Done => Action::Finish,
            TaskState::Aborted => Action::Abort,
        }
    }
}

/// The transition table.
pub fn step_fsm(state: TaskState, event: FsmEvent) -> Result<(TaskState, Action), FsmViolation> {
    use FsmEvent as E;
    use ItemState as I;
    use TaskState as S;
    let next = match (state, event) {
        (S::Done | S::Aborted, _) => None,
        (_, E::Fault | E::EStop) => Some(S::Aborted),
        (S::Start, E::Begin) => Some(S::Localize),
        (S::Localize, E::Localized) => Some(S::PlanTour),
        (S::PlanTour, E::TourPlanned) => Some(S::ItemLoop(I::NextItem)),
        (S::ItemLoop(s), e) => match (s, e) {
            (I::NextItem, E::ItemsRemaining) => Some(S::ItemLoop(I::Navigate)),
            (I::NextItem, E::ListExhausted) => Some(S::ReturnHome),
            (I::Navigate, E::Arrived) => Some(S::ItemLoop(I::Relocalize)),
            (I::Relocalize, E::Relocalized) => Some(S::ItemLoop(I::Detect)),
            (I::Detect, E::Detected) => Some(S::ItemLoop(I::PlanGrasp)),
            (I::Detect, E::Retry) => Some(S::ItemLoop(I::Detect)),
            (I::PlanGrasp, E::GraspPlanned) => Some(S::ItemLoop(I::PlanMotion)),
            (I::PlanMotion, E::MotionPlanned) => Some(S::ItemLoop(I::ExecuteGrasp)),
            (I::PlanMotion, E::Retry) => Some(S::ItemLoop(I::PlanMotion)),
            (I::ExecuteGrasp, E::Executed) => Some(S::ItemLoop(I::VerifyGrasp)),
            (I::VerifyGrasp, E::Verified) => Some(S::ItemLoop(I::Place)),
            (I::VerifyGrasp, E::Retry) => Some(S::ItemLoop(I::Detect)),
            (I::Place, E::InstancesRemaining) => Some(S::ItemLoop(I::Detect)),
            (I::Place, E::ItemDone) => Some(S::ItemLoop(I::NextItem)),
            (I::Detect | I::PlanGrasp | I::PlanMotion | I::VerifyGrasp, E::GiveUp) => Some(S::ItemLoop(I::NextItem)),
            _ => None,
        },
        (S::ReturnHome, E::HomeReached) => Some(S::Done),
        _ => None,
    };
    next.map(|n| (n, n.action())).ok_or(FsmViolation { state, event })
}
