use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mdp::RngStream;
use crate::sac::SquashedGaussianPolicy;
use crate::safety::SafetyCritic;

/// `q < eps`. The threshold is strict.
pub fn is_safe(q: f64, eps: f64) -> bool {
    q < eps
}

/// Whether the critic deems `action` safe in the state with features `obs`.
pub fn is_safe_action(critic: &SafetyCritic, obs: &[f64], action: &[f64], eps: f64) -> Result<bool> {
    let mut x = obs.to_vec();
    x.extend_from_slice(action);
    Ok(is_safe(critic.predict(&x)?, eps))
}

/// Anything that scores candidate actions by estimated failure probability.
pub trait RiskModel {
    fn risks(&self, obs: &[f64], actions: &[Vec<f64>]) -> Result<Vec<f64>>;
}

impl RiskModel for SafetyCritic {
    fn risks(&self, obs: &[f64], actions: &[Vec<f64>]) -> Result<Vec<f64>> {
        let inputs: Vec<Vec<f64>> = actions
            .iter()
            .map(|a| {
                let mut x = obs.to_vec();
                x.extend_from_slice(a);
                x
            })
            .collect();
        self.predict_rows(&inputs)
    }
}

/// Wraps a plain function `(obs, action) -> risk` as a [`RiskModel`].
pub struct FnRisk<F>(pub F);

impl<F: Fn(&[f64], &[f64]) -> f64> RiskModel for FnRisk<F> {
    fn risks(&self, obs: &[f64], actions: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(actions.iter().map(|a| (self.0)(obs, a)).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExplorationMode {
    /// Uniform choice among candidates below the threshold.
    SafestAmong,
    /// The safe candidate closest to the threshold.
    RiskiestSafe,
    /// No masking at all.
    Plain,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskedSample {
    pub action: Vec<f64>,
    /// Critic score of the returned action. `None` in plain mode.
    pub qsafe: Option<f64>,
    pub n_rejected: usize,
    pub fallback_used: bool,
}

/// Index of the lowest risk, ties to the first.
fn argmin(risks: &[f64]) -> usize {
    let mut best = 0;
    for (i, &r) in risks.iter().enumerate() {
        if r < risks[best] {
            best = i;
        }
    }
    best
}

/// Pick uniformly among safe candidates, or the argmin when none is safe.
/// Returns `(index, n_rejected, fallback_used)`.
pub fn select_masked(risks: &[f64], eps: f64, rng: &mut RngStream) -> (usize, usize, bool) {
    let safe: Vec<usize> = (0..risks.len()).filter(|&i| is_safe(risks[i], eps)).collect();
    let rejected = risks.len() - safe.len();
    if safe.is_empty() {
        (argmin(risks), rejected, true)
    } else {
        (safe[rng.below(safe.len())], rejected, false)
    }
}

/// Pick the safe candidate with the highest risk (ties to the first), or
/// the argmin when none is safe.
pub fn select_riskiest_safe(risks: &[f64], eps: f64) -> (usize, usize, bool) {
    let mut best: Option<usize> = None;
    let mut rejected = 0;
    for (i, &r) in risks.iter().enumerate() {
        if !is_safe(r, eps) {
            rejected += 1;
        } else if best.is_none_or(|b| r > risks[b]) {
            best = Some(i);
        }
    }
    match best {
        Some(i) => (i, rejected, false),
        None => (argmin(risks), rejected, true),
    }
}

/// A base policy filtered through a risk model by rejection sampling.
pub struct MaskedSamplingPolicy<'a, R: RiskModel + ?Sized> {
    pub base: &'a SquashedGaussianPolicy,
    pub risk: &'a R,
    pub eps_safe: f64,
    pub n_cand: usize,
    pub mode: ExplorationMode,
}

impl<R: RiskModel + ?Sized> MaskedSamplingPolicy<'_, R> {
    pub fn sample(&self, obs: &[f64], rng: &mut RngStream) -> Result<MaskedSample> {
        match self.mode {
            ExplorationMode::SafestAmong => self.sample_masked(obs, rng),
            ExplorationMode::RiskiestSafe => self.sample_risky_safe(obs, rng),
            ExplorationMode::Plain => {
                let (action, _) = self.base.sample_action(obs, rng)?;
                Ok(MaskedSample {
                    action,
                    qsafe: None,
                    n_rejected: 0,
                    fallback_used: false,
                })
            }
        }
    }

    fn candidates(&self, obs: &[f64], rng: &mut RngStream) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
        let actions: Vec<Vec<f64>> = self
            .base
            .sample_many(obs, self.n_cand.max(1), rng)?
            .into_iter()
            .map(|(a, _)| a)
            .collect();
        let risks = self.risk.risks(obs, &actions)?;
        Ok((actions, risks))
    }

    fn pick(actions: Vec<Vec<f64>>, risks: &[f64], (i, n_rejected, fallback_used): (usize, usize, bool)) -> MaskedSample {
        MaskedSample {
            qsafe: Some(risks[i]),
            action: actions.into_iter().nth(i).expect("index from candidates"),
            n_rejected,
            fallback_used,
        }
    }

    /// Draw `n_cand` candidates from the base policy and return one of the
    /// safe ones uniformly; fall back to the lowest-risk candidate.
    pub fn sample_masked(&self, obs: &[f64], rng: &mut RngStream) -> Result<MaskedSample> {
        let (actions, risks) = self.candidates(obs, rng)?;
        let choice = select_masked(&risks, self.eps_safe, rng);
        Ok(Self::pick(actions, &risks, choice))
    }

    /// Like [`Self::sample_masked`] but return the riskiest safe candidate.
    pub fn sample_risky_safe(&self, obs: &[f64], rng: &mut RngStream) -> Result<MaskedSample> {
        let (actions, risks) = self.candidates(obs, rng)?;
        let choice = select_riskiest_safe(&risks, self.eps_safe);
        Ok(Self::pick(actions, &risks, choice))
    }
}
