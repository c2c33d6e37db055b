use serde::{Deserialize, Serialize};

use crate::envs::layout::{distance, SpiderLayout};
use crate::error::{Result, SqrlError};
use crate::mdp::{RngStream, SafetyAwareTask, StepOutcome};

/// Per-step shaping coefficient on distance to the goal.
pub const DISTANCE_PENALTY: f64 = 0.05;
/// Bonus paid on entering the goal disc.
pub const GOAL_BONUS: f64 = 10.0;

/// Continuous drunk-spider navigation task.
///
/// State is the spider's position. Actions are displacements in `[-1, 1]^2`
/// scaled by `action_scale` and perturbed by uniform noise of magnitude
/// `action_noise` per axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DrunkSpiderContinuous {
    pub layout: SpiderLayout,
    pub action_scale: f64,
    pub action_noise: f64,
    pub horizon: usize,
    pub discount: f64,
}

impl Default for DrunkSpiderContinuous {
    fn default() -> Self {
        Self {
            layout: SpiderLayout::default(),
            action_scale: 1.0,
            action_noise: 0.1,
            horizon: 30,
            discount: 0.99,
        }
    }
}

pub const OBS_DIM: usize = 2;
pub const ACT_DIM: usize = 2;

impl DrunkSpiderContinuous {
    pub fn with_noise(action_noise: f64) -> Self {
        Self {
            action_noise,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate().map_err(SqrlError::InvalidLayout)?;
        if !(self.action_noise >= 0.0) || !(self.action_scale > 0.0) || self.horizon == 0 {
            return Err(SqrlError::Config(
                "drunk spider needs action_noise >= 0, action_scale > 0 and horizon > 0".into(),
            ));
        }
        Ok(())
    }

    /// Network input features: position rescaled to roughly `[-1, 1]`.
    pub fn features(&self, p: &[f64; 2]) -> [f64; 2] {
        let [w, h] = self.layout.arena;
        [2.0 * p[0] / w - 1.0, 2.0 * p[1] / h - 1.0]
    }

    pub fn reward(&self, next: [f64; 2]) -> f64 {
        let bonus = if self.layout.in_goal(next) { GOAL_BONUS } else { 0.0 };
        -DISTANCE_PENALTY * distance(next, self.layout.goal) + bonus
    }
}

/// Apply one noisy, clamped step of the spider dynamics.
pub fn step_continuous(
    task: &DrunkSpiderContinuous,
    state: [f64; 2],
    action: [f64; 2],
    rng: &mut RngStream,
) -> Result<StepOutcome<[f64; 2]>> {
    task.validate_action(&action).map_err(|reason| SqrlError::InvalidAction {
        step: 0,
        action: format!("{action:?}"),
        reason,
    })?;
    Ok(task.step(&state, &action, rng))
}

impl SafetyAwareTask for DrunkSpiderContinuous {
    type State = [f64; 2];
    type Action = [f64; 2];

    fn initial_state(&self, rng: &mut RngStream) -> [f64; 2] {
        let j = self.layout.start_jitter;
        let [x, y] = self.layout.start;
        [x + rng.uniform_range(-j, j), y + rng.uniform_range(-j, j)]
    }

    fn validate_action(&self, a: &[f64; 2]) -> std::result::Result<(), String> {
        if a.iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v)) {
            Ok(())
        } else {
            Err("each component must lie in [-1, 1]".into())
        }
    }

    fn step(&self, s: &[f64; 2], a: &[f64; 2], rng: &mut RngStream) -> StepOutcome<[f64; 2]> {
        // Always draw both noise components so the stream position is
        // independent of the noise level.
        let e = self.action_noise;
        let nx = rng.uniform_range(-1.0, 1.0) * e;
        let ny = rng.uniform_range(-1.0, 1.0) * e;
        let next = self.layout.clamp([
            s[0] + a[0] * self.action_scale + nx,
            s[1] + a[1] * self.action_scale + ny,
        ]);
        let failed = self.layout.in_lava(next);
        StepOutcome {
            next_state: next,
            reward: self.reward(next),
            failed,
            reached_goal: !failed && self.layout.in_goal(next),
        }
    }

    fn is_failure(&self, s: &[f64; 2]) -> bool {
        self.layout.in_lava(*s)
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn discount(&self) -> f64 {
        self.discount
    }
}

/// Scripted policy that follows the route over the top pit:
/// up to the corridor at `y = 9`, across, then down to the goal.
#[derive(Clone, Debug)]
pub struct AroundPathPolicy {
    waypoints: Vec<[f64; 2]>,
    next: usize,
}

impl Default for AroundPathPolicy {
    fn default() -> Self {
        Self::new(vec![[2.5, 9.0], [7.5, 9.0], [9.0, 5.0]])
    }
}

impl AroundPathPolicy {
    pub fn new(waypoints: Vec<[f64; 2]>) -> Self {
        Self { waypoints, next: 0 }
    }

    pub fn reset(&mut self) {
        self.next = 0;
    }

    pub fn act(&mut self, p: &[f64; 2]) -> [f64; 2] {
        while self.next + 1 < self.waypoints.len() && distance(*p, self.waypoints[self.next]) < 0.3 {
            self.next += 1;
        }
        let w = self.waypoints[self.next];
        let d = [w[0] - p[0], w[1] - p[1]];
        let n = (d[0] * d[0] + d[1] * d[1]).sqrt();
        let k = if n > 1.0 { 1.0 / n } else { 1.0 };
        // Per-axis clamp keeps the action inside the box.
        [(d[0] * k).clamp(-1.0, 1.0), (d[1] * k).clamp(-1.0, 1.0)]
    }
}
