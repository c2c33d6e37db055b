//! Shared MDP abstractions: safety-aware tasks, transitions, trajectories,
//! replay buffers, seeded randomness and on-policy rollouts.

mod buffer;
mod rng;

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

pub use buffer::ReplayBuffer;
pub use rng::RngStream;

use crate::error::{Result, SqrlError};

/// Result of one environment transition.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutcome<S> {
    pub next_state: S,
    pub reward: f64,
    pub failed: bool,
    pub reached_goal: bool,
}

/// An MDP extended with a binary failure indicator `I(s)`.
///
/// Failure states are terminal: the rollout machinery never samples a
/// transition out of one, and initial states are never failure states.
pub trait SafetyAwareTask {
    type State: Clone + Debug;
    type Action: Clone + Debug;

    fn initial_state(&self, rng: &mut RngStream) -> Self::State;

    /// Reject actions outside the action space with a human-readable reason.
    fn validate_action(&self, action: &Self::Action) -> std::result::Result<(), String>;

    /// Sample `s' ~ P(.|s, a)`. Callers validate `action` first.
    fn step(&self, state: &Self::State, action: &Self::Action, rng: &mut RngStream)
        -> StepOutcome<Self::State>;

    fn is_failure(&self, state: &Self::State) -> bool;

    /// Maximum number of steps per episode.
    fn horizon(&self) -> usize;

    /// Reward discount.
    fn discount(&self) -> f64;
}

/// A sampled transition. At most one of `failed` and `reached_goal` holds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition<S, A> {
    pub state: S,
    pub action: A,
    pub reward: f64,
    pub next_state: S,
    pub failed: bool,
    pub reached_goal: bool,
    pub timed_out: bool,
}

impl<S, A> Transition<S, A> {
    /// True when the successor is an environment terminal (no bootstrap).
    pub fn terminal(&self) -> bool {
        self.failed || self.reached_goal
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TerminalCause {
    Failure,
    Goal,
    Timeout,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<S, A> {
    pub transitions: Vec<Transition<S, A>>,
    pub cause: TerminalCause,
}

impl<S, A> Trajectory<S, A> {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn total_reward(&self) -> f64 {
        self.transitions.iter().map(|t| t.reward).sum()
    }

    pub fn failed(&self) -> bool {
        self.cause == TerminalCause::Failure
    }
}

/// Anything that maps a state to an action, possibly stochastically.
pub trait Policy<S, A> {
    fn act(&mut self, state: &S, rng: &mut RngStream) -> A;
}

impl<S, A, F> Policy<S, A> for F
where
    F: FnMut(&S, &mut RngStream) -> A,
{
    fn act(&mut self, state: &S, rng: &mut RngStream) -> A {
        self(state, rng)
    }
}

/// Build a transition record and report whether the episode ended.
pub(crate) fn record_step<T: SafetyAwareTask>(
    state: T::State,
    action: T::Action,
    outcome: StepOutcome<T::State>,
    step_index: usize,
    horizon: usize,
) -> Transition<T::State, T::Action> {
    let timed_out = !outcome.failed && !outcome.reached_goal && step_index + 1 >= horizon;
    Transition {
        state,
        action,
        reward: outcome.reward,
        next_state: outcome.next_state,
        failed: outcome.failed,
        reached_goal: outcome.reached_goal,
        timed_out,
    }
}

/// Validate and apply one action, attributing errors to `step`.
pub fn checked_step<T: SafetyAwareTask>(
    task: &T,
    state: &T::State,
    action: &T::Action,
    step: usize,
    rng: &mut RngStream,
) -> Result<StepOutcome<T::State>> {
    task.validate_action(action)
        .map_err(|reason| SqrlError::InvalidAction {
            step,
            action: format!("{action:?}"),
            reason,
        })?;
    Ok(task.step(state, action, rng))
}

/// Run one episode: `s0 ~ mu`, then act and step until failure, goal, or
/// the task horizon.
pub fn rollout<T, P>(policy: &mut P, task: &T, rng: &mut RngStream) -> Result<Trajectory<T::State, T::Action>>
where
    T: SafetyAwareTask,
    P: Policy<T::State, T::Action> + ?Sized,
{
    let horizon = task.horizon();
    let mut state = task.initial_state(rng);
    let mut transitions = Vec::with_capacity(horizon);
    for step in 0..horizon {
        let action = policy.act(&state, rng);
        let outcome = checked_step(task, &state, &action, step, rng)?;
        let next = outcome.next_state.clone();
        let tr = record_step::<T>(state, action, outcome, step, horizon);
        let cause = if tr.failed {
            Some(TerminalCause::Failure)
        } else if tr.reached_goal {
            Some(TerminalCause::Goal)
        } else if tr.timed_out {
            Some(TerminalCause::Timeout)
        } else {
            None
        };
        transitions.push(tr);
        if let Some(cause) = cause {
            return Ok(Trajectory { transitions, cause });
        }
        state = next;
    }
    // horizon == 0
    Ok(Trajectory {
        transitions,
        cause: TerminalCause::Timeout,
    })
}
