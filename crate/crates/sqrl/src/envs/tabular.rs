use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SqrlError};
use crate::mdp::{RngStream, SafetyAwareTask, StepOutcome};

/// Tolerance used when validating that distributions sum to one.
pub const ROW_SUM_TOL: f64 = 1e-9;

/// Finite safety-aware MDP with an explicit transition tensor.
///
/// `P` is stored densely as `[s][a][s']` in row-major order. Unsafe states
/// and goal states are absorbing. Goal flags are optional: an absorbing safe
/// state already has zero future failure probability.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    initial: Vec<f64>,
    unsafe_states: Vec<bool>,
    goal_states: Vec<bool>,
    horizon: usize,
    discount: f64,
}

/// JSON interchange document for tabular tasks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMdpDoc {
    pub n_states: usize,
    pub n_actions: usize,
    #[serde(rename = "P")]
    pub p: Vec<Vec<Vec<f64>>>,
    pub r: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    #[serde(rename = "unsafe")]
    pub unsafe_states: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub goal: Vec<usize>,
}

impl TabularMdp {
    /// Build and validate. `transitions` has length `S*A*S`, `rewards` `S*A`.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        initial: Vec<f64>,
        unsafe_states: Vec<bool>,
        goal_states: Vec<bool>,
    ) -> Result<Self> {
        let mdp = Self {
            n_states,
            n_actions,
            transitions,
            rewards,
            initial,
            unsafe_states,
            goal_states,
            horizon: 100,
            discount: 0.99,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    fn validate(&self) -> Result<()> {
        let (s, a) = (self.n_states, self.n_actions);
        if s == 0 || a == 0 {
            return Err(SqrlError::InvalidLayout("empty state or action set".into()));
        }
        let check_len = |got: usize, expected: usize| {
            if got == expected {
                Ok(())
            } else {
                Err(SqrlError::DimensionMismatch { expected, got })
            }
        };
        check_len(self.transitions.len(), s * a * s)?;
        check_len(self.rewards.len(), s * a)?;
        check_len(self.initial.len(), s)?;
        check_len(self.unsafe_states.len(), s)?;
        check_len(self.goal_states.len(), s)?;
        for st in 0..s {
            for ac in 0..a {
                let row = self.row(st, ac);
                let sum: f64 = row.iter().sum();
                if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > ROW_SUM_TOL {
                    return Err(SqrlError::InvalidLayout(format!(
                        "P(.|{st},{ac}) is not a distribution (sum {sum})"
                    )));
                }
            }
            if self.unsafe_states[st] && self.goal_states[st] {
                return Err(SqrlError::InvalidLayout(format!("state {st} is both unsafe and goal")));
            }
        }
        let mu_sum: f64 = self.initial.iter().sum();
        if self.initial.iter().any(|&p| !(p >= 0.0)) || (mu_sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(SqrlError::InvalidLayout(format!("mu is not a distribution (sum {mu_sum})")));
        }
        if let Some(bad) = (0..s).find(|&st| self.unsafe_states[st] && self.initial[st] > 0.0) {
            return Err(SqrlError::InvalidLayout(format!("mu puts mass on unsafe state {bad}")));
        }
        Ok(())
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.discount = discount;
        self
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// `P(.|s, a)`.
    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.row(s, a)[next]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.rewards[s * self.n_actions + a]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn is_unsafe(&self, s: usize) -> bool {
        self.unsafe_states[s]
    }

    pub fn is_goal(&self, s: usize) -> bool {
        self.goal_states[s]
    }

    /// Unsafe or goal.
    pub fn is_terminal(&self, s: usize) -> bool {
        self.unsafe_states[s] || self.goal_states[s]
    }

    pub fn unsafe_indices(&self) -> Vec<usize> {
        (0..self.n_states).filter(|&s| self.unsafe_states[s]).collect()
    }

    pub fn to_doc(&self) -> TabularMdpDoc {
        let (s, a) = (self.n_states, self.n_actions);
        TabularMdpDoc {
            n_states: s,
            n_actions: a,
            p: (0..s)
                .map(|st| (0..a).map(|ac| self.row(st, ac).to_vec()).collect())
                .collect(),
            r: (0..s)
                .map(|st| (0..a).map(|ac| self.reward(st, ac)).collect())
                .collect(),
            mu: self.initial.clone(),
            unsafe_states: self.unsafe_indices(),
            goal: (0..s).filter(|&st| self.goal_states[st]).collect(),
        }
    }

    pub fn from_doc(doc: &TabularMdpDoc) -> Result<Self> {
        let (s, a) = (doc.n_states, doc.n_actions);
        let mismatch = |expected, got| SqrlError::DimensionMismatch { expected, got };
        if doc.p.len() != s {
            return Err(mismatch(s, doc.p.len()));
        }
        let mut transitions = Vec::with_capacity(s * a * s);
        for per_state in &doc.p {
            if per_state.len() != a {
                return Err(mismatch(a, per_state.len()));
            }
            for row in per_state {
                if row.len() != s {
                    return Err(mismatch(s, row.len()));
                }
                transitions.extend_from_slice(row);
            }
        }
        let mut rewards = Vec::with_capacity(s * a);
        if doc.r.len() != s {
            return Err(mismatch(s, doc.r.len()));
        }
        for row in &doc.r {
            if row.len() != a {
                return Err(mismatch(a, row.len()));
            }
            rewards.extend_from_slice(row);
        }
        let flags = |idx: &[usize]| -> Result<Vec<bool>> {
            let mut v = vec![false; s];
            for &i in idx {
                *v.get_mut(i)
                    .ok_or_else(|| SqrlError::InvalidLayout(format!("state index {i} out of range")))? = true;
            }
            Ok(v)
        };
        Self::new(
            s,
            a,
            transitions,
            rewards,
            doc.mu.clone(),
            flags(&doc.unsafe_states)?,
            flags(&doc.goal)?,
        )
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_doc())?;
        std::fs::write(path, text).map_err(|e| SqrlError::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SqrlError::io(path, e))?;
        Self::from_doc(&serde_json::from_str(&text)?)
    }
}

impl SafetyAwareTask for TabularMdp {
    type State = usize;
    type Action = usize;

    fn initial_state(&self, rng: &mut RngStream) -> usize {
        rng.categorical(&self.initial)
    }

    fn validate_action(&self, a: &usize) -> std::result::Result<(), String> {
        if *a < self.n_actions {
            Ok(())
        } else {
            Err(format!("action index must be below {}", self.n_actions))
        }
    }

    fn step(&self, s: &usize, a: &usize, rng: &mut RngStream) -> StepOutcome<usize> {
        let next = rng.categorical(self.row(*s, *a));
        StepOutcome {
            next_state: next,
            reward: self.reward(*s, *a),
            failed: self.unsafe_states[next],
            reached_goal: self.goal_states[next],
        }
    }

    fn is_failure(&self, s: &usize) -> bool {
        self.unsafe_states[*s]
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn discount(&self) -> f64 {
        self.discount
    }
}

/// A transition into an unsafe state with mass in `(0, eps]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmallUnsafeMass {
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionReport {
    /// Every transition into an unsafe state has mass 0 or more than `eps`.
    pub assumption2: bool,
    pub assumption2_witnesses: Vec<SmallUnsafeMass>,
    /// Every safe state has an action with zero mass on unsafe states.
    pub assumption4: bool,
    /// Safe states with no such action.
    pub assumption4_witnesses: Vec<usize>,
}

impl AssumptionReport {
    pub fn passed(&self) -> bool {
        self.assumption2 && self.assumption4
    }
}

/// Exhaustive scan of the transition tensor from every safe state.
pub fn check_assumptions(mdp: &TabularMdp, eps: f64) -> AssumptionReport {
    let mut small = Vec::new();
    let mut no_safe_action = Vec::new();
    for s in (0..mdp.n_states()).filter(|&s| !mdp.is_unsafe(s)) {
        let mut has_safe_action = false;
        for a in 0..mdp.n_actions() {
            let row = mdp.row(s, a);
            let mut unsafe_mass = 0.0;
            for (next, &p) in row.iter().enumerate() {
                if mdp.is_unsafe(next) && p > 0.0 {
                    unsafe_mass += p;
                    if p <= eps {
                        small.push(SmallUnsafeMass {
                            state: s,
                            action: a,
                            next_state: next,
                            probability: p,
                        });
                    }
                }
            }
            has_safe_action |= unsafe_mass == 0.0;
        }
        if !has_safe_action {
            no_safe_action.push(s);
        }
    }
    AssumptionReport {
        assumption2: small.is_empty(),
        assumption2_witnesses: small,
        assumption4: no_safe_action.is_empty(),
        assumption4_witnesses: no_safe_action,
    }
}
