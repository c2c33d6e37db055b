use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SqrlError};
use crate::mdp::RngStream;
use crate::nn::{Adam, DifferentiableLoss, Mlp, OutputActivation};
use crate::sac::policy::SquashedGaussianPolicy;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SacConfig {
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    /// Defaults to minus the action dimension when absent.
    pub target_entropy: Option<f64>,
    pub initial_alpha: f64,
    pub action_scale: f64,
}

impl Default for SacConfig {
    fn default() -> Self {
        Self {
            hidden: vec![64, 64],
            lr: 3e-4,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 128,
            target_entropy: None,
            initial_alpha: 1.0,
            action_scale: 1.0,
        }
    }
}

impl SacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(SqrlError::Config(m.to_string()));
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("sac.hidden needs at least one positive layer width");
        }
        if !(self.lr > 0.0) {
            return bad("sac.lr must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("sac.gamma must lie in [0, 1]");
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("sac.tau must lie in (0, 1]");
        }
        if self.batch_size == 0 {
            return bad("sac.batch_size must be positive");
        }
        if !(self.initial_alpha > 0.0) || !(self.action_scale > 0.0) {
            return bad("sac.initial_alpha and sac.action_scale must be positive");
        }
        Ok(())
    }
}

/// Minibatch in network coordinates. `terminal[i]` is 1 where the
/// transition ended in failure or at the goal and 0 otherwise (timeouts
/// bootstrap).
#[derive(Clone, Debug, PartialEq)]
pub struct SacBatch {
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub rewards: Array1<f64>,
    pub next_obs: Array2<f64>,
    pub terminal: Array1<f64>,
}

impl SacBatch {
    pub fn new(
        obs: Array2<f64>,
        actions: Array2<f64>,
        rewards: Array1<f64>,
        next_obs: Array2<f64>,
        terminal: Array1<f64>,
    ) -> Result<Self> {
        let b = obs.nrows();
        if b == 0 {
            return Err(SqrlError::EmptyBatch);
        }
        for n in [actions.nrows(), rewards.len(), next_obs.nrows(), terminal.len()] {
            if n != b {
                return Err(SqrlError::DimensionMismatch { expected: b, got: n });
            }
        }
        if next_obs.ncols() != obs.ncols() {
            return Err(SqrlError::DimensionMismatch {
                expected: obs.ncols(),
                got: next_obs.ncols(),
            });
        }
        Ok(Self {
            obs,
            actions,
            rewards,
            next_obs,
            terminal,
        })
    }

    pub fn len(&self) -> usize {
        self.obs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn obs_action_input(obs: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Array2<f64> {
    concatenate![Axis(1), obs, actions]
}

/// Mean squared error `mean((net(x) - y)^2)` of a scalar-output network and
/// its parameter gradient.
pub fn squared_error(net: &Mlp, inputs: ArrayView2<'_, f64>, targets: &Array1<f64>) -> Result<(f64, Vec<f64>)> {
    if inputs.nrows() == 0 {
        return Err(SqrlError::EmptyBatch);
    }
    if targets.len() != inputs.nrows() {
        return Err(SqrlError::DimensionMismatch {
            expected: inputs.nrows(),
            got: targets.len(),
        });
    }
    let cache = net.forward_cached(inputs)?;
    let q = cache.output().column(0).to_owned();
    let diff = &q - targets;
    let b = diff.len() as f64;
    let loss = diff.mapv(|d| d * d).sum() / b;
    let upstream = (diff.mapv(|d| 2.0 * d / b)).insert_axis(Axis(1));
    Ok((loss, net.backward(&cache, upstream.view())?.params))
}

/// Twin Q-networks with delayed targets.
#[derive(Clone, Debug, PartialEq)]
pub struct TwinCritics {
    pub q1: Mlp,
    pub q2: Mlp,
    pub q1_target: Mlp,
    pub q2_target: Mlp,
}

impl TwinCritics {
    pub fn new(obs_dim: usize, act_dim: usize, hidden: &[usize], rng: &mut RngStream) -> Self {
        let mut sizes = vec![obs_dim + act_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let q1 = Mlp::new(&sizes, OutputActivation::Identity, rng);
        let q2 = Mlp::new(&sizes, OutputActivation::Identity, rng);
        Self {
            q1_target: q1.clone(),
            q2_target: q2.clone(),
            q1,
            q2,
        }
    }

    pub fn polyak(&mut self, tau: f64) {
        self.q1_target.soft_update_from(&self.q1, tau);
        self.q2_target.soft_update_from(&self.q2, tau);
    }

    pub fn min_target(&self, inputs: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let a = self.q1_target.forward_batch(inputs)?;
        let b = self.q2_target.forward_batch(inputs)?;
        Ok(Array1::from_shape_fn(inputs.nrows(), |i| a[(i, 0)].min(b[(i, 0)])))
    }
}

/// Entropy temperature `alpha = exp(log_alpha)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Temperature {
    pub log_alpha: f64,
    pub target_entropy: f64,
    opt: Adam,
}

impl Temperature {
    pub fn new(initial_alpha: f64, target_entropy: f64, lr: f64) -> Self {
        Self {
            log_alpha: initial_alpha.ln(),
            target_entropy,
            opt: Adam::new(1, lr),
        }
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// One step on `-alpha * (mean_log_prob + target_entropy)` with respect
    /// to `log_alpha`. Returns the new alpha.
    pub fn update(&mut self, mean_log_prob: f64) -> Result<f64> {
        let grad = -self.alpha() * (mean_log_prob + self.target_entropy);
        let mut p = [self.log_alpha];
        self.opt.step(&mut p, &[grad])?;
        self.log_alpha = p[0];
        Ok(self.alpha())
    }
}

/// Safety penalty added to the policy loss: `weight * Q_safe(s, a)` for
/// reparameterized `a`.
#[derive(Clone, Copy, Debug)]
pub struct SafetyTerm<'a> {
    pub critic: &'a Mlp,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyObjective {
    pub loss: f64,
    pub grads: Vec<f64>,
    pub mean_log_prob: f64,
    /// Mean safety-critic value at the fresh actions, when a critic was given.
    pub mean_qsafe: Option<f64>,
}

/// `mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a) + weight * Q_safe(s, a))`
/// with `a` reparameterized by `noise`. Only the policy receives gradients.
pub fn policy_objective(
    policy: &SquashedGaussianPolicy,
    critics: &TwinCritics,
    alpha: f64,
    safety: Option<SafetyTerm<'_>>,
    obs: ArrayView2<'_, f64>,
    noise: ArrayView2<'_, f64>,
) -> Result<PolicyObjective> {
    let b = obs.nrows();
    if b == 0 {
        return Err(SqrlError::EmptyBatch);
    }
    let od = obs.ncols();
    let sample = policy.sample_batch(obs, noise)?;
    let x = obs_action_input(obs, sample.actions.view());
    let c1 = critics.q1.forward_cached(x.view())?;
    let c2 = critics.q2.forward_cached(x.view())?;
    let (o1, o2) = (c1.output(), c2.output());
    let mut up1 = Array2::zeros((b, 1));
    let mut up2 = Array2::zeros((b, 1));
    let mut qmin_sum = 0.0;
    for i in 0..b {
        if o1[(i, 0)] <= o2[(i, 0)] {
            qmin_sum += o1[(i, 0)];
            up1[(i, 0)] = -1.0 / b as f64;
        } else {
            qmin_sum += o2[(i, 0)];
            up2[(i, 0)] = -1.0 / b as f64;
        }
    }
    let mut d_actions: Array2<f64> = critics.q1.input_gradient(&c1, up1.view())?.slice(s![.., od..]).to_owned();
    d_actions += &critics.q2.input_gradient(&c2, up2.view())?.slice(s![.., od..]);

    let mut mean_qsafe = None;
    let mut safety_sum = 0.0;
    if let Some(term) = safety {
        let cs = term.critic.forward_cached(x.view())?;
        let qs = cs.output().column(0).to_owned();
        let m = qs.mean().expect("nonempty");
        mean_qsafe = Some(m);
        safety_sum = term.weight * qs.sum();
        if term.weight != 0.0 {
            let up = Array2::from_elem((b, 1), term.weight / b as f64);
            d_actions += &term.critic.input_gradient(&cs, up.view())?.slice(s![.., od..]);
        }
    }

    let mean_log_prob = sample.log_probs.mean().expect("nonempty");
    let loss = alpha * mean_log_prob + (safety_sum - qmin_sum) / b as f64;
    let d_logp = Array1::from_elem(b, alpha / b as f64);
    let grads = policy.backward(&sample, d_actions.view(), &d_logp)?;
    Ok(PolicyObjective {
        loss,
        grads,
        mean_log_prob,
        mean_qsafe,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SacStats {
    pub critic_loss: f64,
    pub policy_loss: f64,
    pub alpha: f64,
    pub mean_log_prob: f64,
    pub mean_qsafe: Option<f64>,
}

/// Soft actor-critic learner: policy, twin critics, temperature and their
/// optimizers.
#[derive(Clone, Debug)]
pub struct Sac {
    pub policy: SquashedGaussianPolicy,
    pub critics: TwinCritics,
    pub temperature: Temperature,
    pub config: SacConfig,
    policy_opt: Adam,
    q1_opt: Adam,
    q2_opt: Adam,
}

impl Sac {
    pub fn new(obs_dim: usize, act_dim: usize, config: SacConfig, rng: &mut RngStream) -> Result<Self> {
        config.validate()?;
        let policy = SquashedGaussianPolicy::new(obs_dim, act_dim, &config.hidden, config.action_scale, rng);
        let critics = TwinCritics::new(obs_dim, act_dim, &config.hidden, rng);
        let target_entropy = config.target_entropy.unwrap_or(-(act_dim as f64));
        Ok(Self::from_parts(policy, critics, Temperature::new(config.initial_alpha, target_entropy, config.lr), config))
    }

    pub fn from_parts(policy: SquashedGaussianPolicy, critics: TwinCritics, temperature: Temperature, config: SacConfig) -> Self {
        Self {
            policy_opt: Adam::new(policy.net.n_params(), config.lr),
            q1_opt: Adam::new(critics.q1.n_params(), config.lr),
            q2_opt: Adam::new(critics.q2.n_params(), config.lr),
            policy,
            critics,
            temperature,
            config,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.temperature.alpha()
    }

    /// `y = r + gamma * (1 - terminal) * (min target Q(s', a') - alpha * log pi(a'|s'))`
    /// with `a'` drawn using `next_noise`.
    pub fn critic_targets(&self, batch: &SacBatch, next_noise: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        let next = self.policy.sample_batch(batch.next_obs.view(), next_noise)?;
        let x = obs_action_input(batch.next_obs.view(), next.actions.view());
        let qmin = self.critics.min_target(x.view())?;
        let alpha = self.alpha();
        let g = self.config.gamma;
        Ok(Array1::from_shape_fn(batch.len(), |i| {
            let bootstrap = if batch.terminal[i] > 0.0 {
                0.0
            } else {
                g * (qmin[i] - alpha * next.log_probs[i])
            };
            batch.rewards[i] + bootstrap
        }))
    }

    /// Loss `(mean (Q1 - y)^2 + mean (Q2 - y)^2) / 2` and both gradients.
    pub fn critic_loss(&self, batch: &SacBatch, targets: &Array1<f64>) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let x = obs_action_input(batch.obs.view(), batch.actions.view());
        let (l1, mut g1) = squared_error(&self.critics.q1, x.view(), targets)?;
        let (l2, mut g2) = squared_error(&self.critics.q2, x.view(), targets)?;
        g1.iter_mut().chain(g2.iter_mut()).for_each(|g| *g *= 0.5);
        Ok((0.5 * (l1 + l2), g1, g2))
    }

    pub fn critic_update(&mut self, batch: &SacBatch, rng: &mut RngStream) -> Result<f64> {
        if batch.is_empty() {
            return Err(SqrlError::EmptyBatch);
        }
        let noise = self.policy.draw_noise(batch.len(), rng);
        let targets = self.critic_targets(batch, noise.view())?;
        let (loss, g1, g2) = self.critic_loss(batch, &targets)?;
        self.q1_opt.step(self.critics.q1.params_mut(), &g1)?;
        self.q2_opt.step(self.critics.q2.params_mut(), &g2)?;
        Ok(loss)
    }

    pub fn policy_update(
        &mut self,
        obs: ArrayView2<'_, f64>,
        rng: &mut RngStream,
        safety: Option<SafetyTerm<'_>>,
    ) -> Result<PolicyObjective> {
        let noise = self.policy.draw_noise(obs.nrows(), rng);
        let obj = policy_objective(&self.policy, &self.critics, self.alpha(), safety, obs, noise.view())?;
        self.policy_opt.step(self.policy.net.params_mut(), &obj.grads)?;
        Ok(obj)
    }

    pub fn temperature_update(&mut self, mean_log_prob: f64) -> Result<f64> {
        self.temperature.update(mean_log_prob)
    }

    pub fn polyak_update(&mut self) {
        self.critics.polyak(self.config.tau);
    }

    /// Critic step, policy step, temperature step, then target averaging.
    pub fn update(&mut self, batch: &SacBatch, rng: &mut RngStream, safety: Option<SafetyTerm<'_>>) -> Result<SacStats> {
        let critic_loss = self.critic_update(batch, rng)?;
        let obj = self.policy_update(batch.obs.view(), rng, safety)?;
        let alpha = self.temperature_update(obj.mean_log_prob)?;
        self.polyak_update();
        Ok(SacStats {
            critic_loss,
            policy_loss: obj.loss,
            alpha,
            mean_log_prob: obj.mean_log_prob,
            mean_qsafe: obj.mean_qsafe,
        })
    }
}

/// Critic regression loss of one Q-network with fixed targets, for
/// gradient checking.
pub struct CriticLoss {
    pub inputs: Array2<f64>,
    pub targets: Array1<f64>,
}

impl DifferentiableLoss for CriticLoss {
    fn loss(&self, net: &Mlp) -> f64 {
        squared_error(net, self.inputs.view(), &self.targets).expect("shapes fixed at construction").0
    }
    fn gradient(&self, net: &Mlp) -> Vec<f64> {
        squared_error(net, self.inputs.view(), &self.targets).expect("shapes fixed at construction").1
    }
}

/// The reparameterized policy objective as a function of the policy
/// network, with critics, noise and multipliers frozen.
pub struct PolicyLoss<'a> {
    pub critics: &'a TwinCritics,
    pub safety: Option<SafetyTerm<'a>>,
    pub alpha: f64,
    pub action_scale: f64,
    pub obs: Array2<f64>,
    pub noise: Array2<f64>,
}

impl PolicyLoss<'_> {
    fn eval(&self, net: &Mlp) -> PolicyObjective {
        let policy = SquashedGaussianPolicy::from_net(net.clone(), self.action_scale);
        policy_objective(&policy, self.critics, self.alpha, self.safety, self.obs.view(), self.noise.view())
            .expect("shapes fixed at construction")
    }
}

impl DifferentiableLoss for PolicyLoss<'_> {
    fn loss(&self, net: &Mlp) -> f64 {
        self.eval(net).loss
    }
    fn gradient(&self, net: &Mlp) -> Vec<f64> {
        self.eval(net).grads
    }
}
