use ndarray::{Array1, Array2};

use crate::error::{Result, SqrlError};
use crate::mdp::{RngStream, Transition};
use crate::nn::{stack_rows, Adam, Mlp, OutputActivation};
use crate::sac::squared_error;

/// Estimator of the discounted probability of future failure, with a
/// delayed target copy. Outputs lie in `[0, 1]` through a sigmoid head.
#[derive(Clone, Debug, PartialEq)]
pub struct SafetyCritic {
    pub net: Mlp,
    pub target: Mlp,
    pub gamma_safe: f64,
    pub tau: f64,
    opt: Adam,
}

/// What follows a transition, for the purpose of the safety target.
#[derive(Clone, Debug, PartialEq)]
pub enum SafetyOutcome {
    Failed,
    Goal,
    /// Network input for `(s', a')` with `a'` from the unconstrained policy.
    Continue(Vec<f64>),
}

impl SafetyCritic {
    /// `hidden` may be empty, giving a logistic model of the input.
    pub fn new(input_dim: usize, hidden: &[usize], gamma_safe: f64, lr: f64, tau: f64, rng: &mut RngStream) -> Result<Self> {
        if !(gamma_safe > 0.0 && gamma_safe < 1.0) {
            return Err(SqrlError::Config(format!("gamma_safe {gamma_safe} must lie in (0, 1)")));
        }
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, OutputActivation::Sigmoid, rng);
        Ok(Self::from_nets(net.clone(), net, gamma_safe, lr, tau))
    }

    pub fn from_nets(net: Mlp, target: Mlp, gamma_safe: f64, lr: f64, tau: f64) -> Self {
        Self {
            opt: Adam::new(net.n_params(), lr),
            net,
            target,
            gamma_safe,
            tau,
        }
    }

    pub fn lr(&self) -> f64 {
        self.opt.lr
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn predict(&self, input: &[f64]) -> Result<f64> {
        Ok(self.net.forward(input)?[0])
    }

    pub fn predict_rows(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if inputs.is_empty() {
            return Ok(Vec::new());
        }
        let x = stack_rows(inputs, self.input_dim());
        Ok(self.net.forward_batch(x.view())?.column(0).to_vec())
    }

    pub fn target_predict(&self, input: &[f64]) -> Result<f64> {
        Ok(self.target.forward(input)?[0])
    }

    /// `gamma_safe` after a failure, 0 at the goal, otherwise
    /// `gamma_safe * Q_target(s', a')`.
    pub fn bellman_target(&self, outcome: &SafetyOutcome) -> Result<f64> {
        Ok(match outcome {
            SafetyOutcome::Failed => self.gamma_safe,
            SafetyOutcome::Goal => 0.0,
            SafetyOutcome::Continue(x) => self.gamma_safe * self.target_predict(x)?,
        })
    }

    fn bellman_targets(&self, outcomes: &[SafetyOutcome]) -> Result<Array1<f64>> {
        let cont: Vec<&Vec<f64>> = outcomes
            .iter()
            .filter_map(|o| match o {
                SafetyOutcome::Continue(x) => Some(x),
                _ => None,
            })
            .collect();
        let boot = if cont.is_empty() {
            Array2::zeros((0, 1))
        } else {
            self.target.forward_batch(stack_rows(cont, self.input_dim()).view())?
        };
        let mut k = 0;
        Ok(outcomes
            .iter()
            .map(|o| match o {
                SafetyOutcome::Failed => self.gamma_safe,
                SafetyOutcome::Goal => 0.0,
                SafetyOutcome::Continue(_) => {
                    k += 1;
                    self.gamma_safe * boot[(k - 1, 0)]
                }
            })
            .collect())
    }

    /// One squared-error step on `(inputs, targets)`, then target averaging.
    pub fn regress(&mut self, inputs: &Array2<f64>, targets: &Array1<f64>) -> Result<f64> {
        let (loss, grads) = squared_error(&self.net, inputs.view(), targets)?;
        self.opt.step(self.net.params_mut(), &grads)?;
        self.target.soft_update_from(&self.net, self.tau);
        Ok(loss)
    }

    /// Regress each input toward the Bellman target of its outcome.
    pub fn update_from_outcomes(&mut self, inputs: &[Vec<f64>], outcomes: &[SafetyOutcome]) -> Result<f64> {
        if inputs.is_empty() {
            return Err(SqrlError::EmptyBatch);
        }
        if inputs.len() != outcomes.len() {
            return Err(SqrlError::DimensionMismatch {
                expected: inputs.len(),
                got: outcomes.len(),
            });
        }
        let targets = self.bellman_targets(outcomes)?;
        let x = stack_rows(inputs, self.input_dim());
        self.regress(&x, &targets)
    }
}

fn outcome_of<S, A>(
    critic_input_dim: usize,
    t: &Transition<S, A>,
    encode: &impl Fn(&S, &A) -> Vec<f64>,
    next_action: &mut impl FnMut(&S, &mut RngStream) -> A,
    rng: &mut RngStream,
) -> SafetyOutcome {
    if t.failed {
        SafetyOutcome::Failed
    } else if t.reached_goal {
        SafetyOutcome::Goal
    } else {
        let a = next_action(&t.next_state, rng);
        let x = encode(&t.next_state, &a);
        debug_assert_eq!(x.len(), critic_input_dim);
        SafetyOutcome::Continue(x)
    }
}

/// Bellman target for one transition. Timeouts bootstrap like ordinary
/// steps; `next_action` should sample the unconstrained policy.
pub fn safety_bellman_target<S, A>(
    critic: &SafetyCritic,
    t: &Transition<S, A>,
    encode: impl Fn(&S, &A) -> Vec<f64>,
    mut next_action: impl FnMut(&S, &mut RngStream) -> A,
    rng: &mut RngStream,
) -> Result<f64> {
    let o = outcome_of(critic.input_dim(), t, &encode, &mut next_action, rng);
    critic.bellman_target(&o)
}

/// One gradient step of the safety critic on a minibatch of transitions.
pub fn jsafe_update<S, A>(
    critic: &mut SafetyCritic,
    batch: &[&Transition<S, A>],
    encode: impl Fn(&S, &A) -> Vec<f64>,
    mut next_action: impl FnMut(&S, &mut RngStream) -> A,
    rng: &mut RngStream,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(SqrlError::EmptyBatch);
    }
    let dim = critic.input_dim();
    let inputs: Vec<Vec<f64>> = batch.iter().map(|t| encode(&t.state, &t.action)).collect();
    let outcomes: Vec<SafetyOutcome> = batch
        .iter()
        .map(|t| outcome_of(dim, t, &encode, &mut next_action, rng))
        .collect();
    critic.update_from_outcomes(&inputs, &outcomes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tr(failed: bool, goal: bool) -> Transition<f64, f64> {
        Transition {
            state: 0.0,
            action: 0.0,
            reward: 0.0,
            next_state: 1.0,
            failed,
            reached_goal: goal,
            timed_out: false,
        }
    }

    fn critic(seed: u64) -> SafetyCritic {
        SafetyCritic::new(2, &[8], 0.7, 1e-2, 1.0, &mut RngStream::new(seed)).unwrap()
    }

    fn enc(s: &f64, a: &f64) -> Vec<f64> {
        vec![*s, *a]
    }

    #[test]
    fn failed_target_is_gamma() {
        let c = critic(1);
        let mut rng = RngStream::new(0);
        let y = safety_bellman_target(&c, &tr(true, false), enc, |_, _| 0.0, &mut rng).unwrap();
        assert_eq!(y, 0.7);
        let y = safety_bellman_target(&c, &tr(false, true), enc, |_, _| 0.0, &mut rng).unwrap();
        assert_eq!(y, 0.0);
    }

    #[test]
    fn continuing_target_scales_target_net() {
        let mut c = critic(2);
        // constant 0.5 output: zero weights, zero bias through the sigmoid
        c.target.params_mut().fill(0.0);
        let y = safety_bellman_target(&c, &tr(false, false), enc, |_, _| 0.3, &mut RngStream::new(0)).unwrap();
        assert!((y - 0.35).abs() < 1e-15);
    }

    #[test]
    fn regression_fixed_points() {
        for (failed, goal, want) in [(true, false, 0.7), (false, true, 0.0)] {
            let mut c = critic(3);
            let t = tr(failed, goal);
            let batch = vec![&t; 16];
            let mut rng = RngStream::new(4);
            for _ in 0..3000 {
                jsafe_update(&mut c, &batch, enc, |_, _| 0.0, &mut rng).unwrap();
            }
            let q = c.predict(&[0.0, 0.0]).unwrap();
            assert!((q - want).abs() < 0.01, "want {want}, got {q}");
        }
    }

    #[test]
    fn empty_batch_is_error() {
        let mut c = critic(5);
        let batch: Vec<&Transition<f64, f64>> = Vec::new();
        assert!(matches!(
            jsafe_update(&mut c, &batch, enc, |_, _| 0.0, &mut RngStream::new(0)),
            Err(SqrlError::EmptyBatch)
        ));
    }

    #[test]
    fn outputs_in_unit_interval() {
        let mut rng = RngStream::new(6);
        let mut c = SafetyCritic::new(2, &[16, 16], 0.65, 1e-3, 0.005, &mut rng).unwrap();
        c.net.params_mut().iter_mut().for_each(|p| *p *= 50.0);
        for _ in 0..200 {
            let x = [rng.uniform_range(-10.0, 10.0), rng.uniform_range(-10.0, 10.0)];
            let q = c.predict(&x).unwrap();
            assert!((0.0..=1.0).contains(&q));
        }
    }
}
