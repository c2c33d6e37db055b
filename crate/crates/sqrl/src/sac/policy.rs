use ndarray::{Array1, Array2, ArrayView2};

use crate::error::Result;
use crate::mdp::RngStream;
use crate::nn::{ForwardCache, Mlp, OutputActivation};

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

pub(crate) fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln(1 - tanh(u)^2)` without cancellation for large `|u|`.
pub(crate) fn log1m_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

/// Tanh-squashed diagonal Gaussian policy.
///
/// The network maps an observation to `act_dim` means followed by
/// `act_dim` log standard deviations. Sampled actions are
/// `scale * tanh(mean + std * xi)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SquashedGaussianPolicy {
    pub net: Mlp,
    pub act_dim: usize,
    pub action_scale: f64,
}

/// A batch of reparameterized samples with everything needed to
/// backpropagate through them.
#[derive(Clone, Debug)]
pub struct PolicySample {
    pub actions: Array2<f64>,
    pub log_probs: Array1<f64>,
    noise: Array2<f64>,
    /// Pre-squash values `mean + std * xi`.
    pre: Array2<f64>,
    std: Array2<f64>,
    /// Whether the raw log-std was inside the clamp range.
    ls_active: Array2<bool>,
    cache: ForwardCache,
}

impl SquashedGaussianPolicy {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize], action_scale: f64, rng: &mut RngStream) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(2 * act_dim);
        Self {
            net: Mlp::new(&sizes, OutputActivation::Identity, rng),
            act_dim,
            action_scale,
        }
    }

    pub fn from_net(net: Mlp, action_scale: f64) -> Self {
        let act_dim = net.output_dim() / 2;
        Self {
            net,
            act_dim,
            action_scale,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Mean and clamped log-std for one observation.
    pub fn head(&self, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let out = self.net.forward(obs)?;
        let (mean, ls) = out.split_at(self.act_dim);
        Ok((mean.to_vec(), ls.iter().map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX)).collect()))
    }

    /// Deterministic action `scale * tanh(mean)`.
    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let (mean, _) = self.head(obs)?;
        Ok(mean.iter().map(|m| self.action_scale * m.tanh()).collect())
    }

    pub fn draw_noise(&self, rows: usize, rng: &mut RngStream) -> Array2<f64> {
        Array2::from_shape_fn((rows, self.act_dim), |_| rng.standard_normal())
    }

    /// Single reparameterized draw.
    pub fn sample_action(&self, obs: &[f64], rng: &mut RngStream) -> Result<(Vec<f64>, f64)> {
        let (mean, ls) = self.head(obs)?;
        let xi: Vec<f64> = (0..self.act_dim).map(|_| rng.standard_normal()).collect();
        Ok(self.squash(&mean, &ls, &xi))
    }

    /// `n` draws for one observation, sharing one network evaluation.
    pub fn sample_many(&self, obs: &[f64], n: usize, rng: &mut RngStream) -> Result<Vec<(Vec<f64>, f64)>> {
        let (mean, ls) = self.head(obs)?;
        Ok((0..n)
            .map(|_| {
                let xi: Vec<f64> = (0..self.act_dim).map(|_| rng.standard_normal()).collect();
                self.squash(&mean, &ls, &xi)
            })
            .collect())
    }

    fn squash(&self, mean: &[f64], ls: &[f64], xi: &[f64]) -> (Vec<f64>, f64) {
        let mut action = Vec::with_capacity(self.act_dim);
        let mut logp = 0.0;
        for i in 0..self.act_dim {
            let u = mean[i] + ls[i].exp() * xi[i];
            action.push(self.action_scale * u.tanh());
            logp += self.log_density_term(xi[i], ls[i], u);
        }
        (action, logp)
    }

    fn log_density_term(&self, xi: f64, ls: f64, u: f64) -> f64 {
        -0.5 * xi * xi - ls - HALF_LN_2PI - log1m_tanh_sq(u) - self.action_scale.ln()
    }

    /// Log-density of a given action in `(-scale, scale)^act_dim`.
    pub fn log_prob_of(&self, obs: &[f64], action: &[f64]) -> Result<f64> {
        let (mean, ls) = self.head(obs)?;
        let mut logp = 0.0;
        for i in 0..self.act_dim {
            let y = (action[i] / self.action_scale).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
            let u = y.atanh();
            let xi = (u - mean[i]) / ls[i].exp();
            logp += self.log_density_term(xi, ls[i], u);
        }
        Ok(logp)
    }

    /// Reparameterized batch of samples, one per observation row, using the
    /// supplied standard-normal noise.
    pub fn sample_batch(&self, obs: ArrayView2<'_, f64>, noise: ArrayView2<'_, f64>) -> Result<PolicySample> {
        let cache = self.net.forward_cached(obs)?;
        let out = cache.output();
        let (b, d) = (obs.nrows(), self.act_dim);
        let mut actions = Array2::zeros((b, d));
        let mut log_probs = Array1::zeros(b);
        let mut pre = Array2::zeros((b, d));
        let mut std = Array2::zeros((b, d));
        let mut ls_active = Array2::from_elem((b, d), true);
        for r in 0..b {
            let mut lp = 0.0;
            for i in 0..d {
                let raw = out[(r, d + i)];
                let ls = raw.clamp(LOG_STD_MIN, LOG_STD_MAX);
                ls_active[(r, i)] = (LOG_STD_MIN..=LOG_STD_MAX).contains(&raw);
                let sd = ls.exp();
                let u = out[(r, i)] + sd * noise[(r, i)];
                pre[(r, i)] = u;
                std[(r, i)] = sd;
                actions[(r, i)] = self.action_scale * u.tanh();
                lp += self.log_density_term(noise[(r, i)], ls, u);
            }
            log_probs[r] = lp;
        }
        Ok(PolicySample {
            actions,
            log_probs,
            noise: noise.to_owned(),
            pre,
            std,
            ls_active,
            cache,
        })
    }

    /// Parameter gradient of a scalar `L` given `dL/d action` and
    /// `dL/d log_prob` for every sample.
    pub fn backward(
        &self,
        sample: &PolicySample,
        d_actions: ArrayView2<'_, f64>,
        d_log_probs: &Array1<f64>,
    ) -> Result<Vec<f64>> {
        let (b, d) = sample.actions.dim();
        let mut upstream = Array2::zeros((b, 2 * d));
        for r in 0..b {
            for i in 0..d {
                let t = sample.pre[(r, i)].tanh();
                let da_du = self.action_scale * (1.0 - t * t);
                let du_dls = sample.std[(r, i)] * sample.noise[(r, i)];
                // dlogp/du through the tanh correction, plus the -ls term.
                let dlogp_du = 2.0 * t;
                let g_u = d_actions[(r, i)] * da_du + d_log_probs[r] * dlogp_du;
                upstream[(r, i)] = g_u;
                upstream[(r, d + i)] = if sample.ls_active[(r, i)] {
                    g_u * du_dls - d_log_probs[r]
                } else {
                    0.0
                };
            }
        }
        Ok(self.net.backward(&sample.cache, upstream.view())?.params)
    }
}
