use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::envs::{DrunkSpiderContinuous, SpiderLayout};
use crate::error::{Result, SqrlError};
use crate::sac::SacConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    #[default]
    Sqrl,
    Sac,
    RiskSensitive,
}

impl FromStr for Baseline {
    type Err = SqrlError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrl" => Ok(Baseline::Sqrl),
            "sac" => Ok(Baseline::Sac),
            "risk-sensitive" => Ok(Baseline::RiskSensitive),
            other => Err(SqrlError::UnknownBaseline(other.to_string())),
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Baseline::Sqrl => "sqrl",
            Baseline::Sac => "sac",
            Baseline::RiskSensitive => "risk-sensitive",
        })
    }
}

/// Drunk-spider task pair: pre-training and target differ only in action
/// noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub layout: SpiderLayout,
    pub pretrain_noise: f64,
    pub target_noise: f64,
    pub action_scale: f64,
    pub horizon: usize,
    /// Reward critics value a failure as an absorbing state that keeps
    /// paying its step reward, `r / (1 - gamma)`, instead of cutting the
    /// return at zero.
    pub absorbing_failures: bool,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            layout: SpiderLayout::default(),
            pretrain_noise: 0.1,
            target_noise: 0.2,
            action_scale: 1.0,
            horizon: 30,
            absorbing_failures: true,
        }
    }
}

impl EnvConfig {
    pub fn task(&self, noise: f64, discount: f64) -> DrunkSpiderContinuous {
        DrunkSpiderContinuous {
            layout: self.layout.clone(),
            action_scale: self.action_scale,
            action_noise: noise,
            horizon: self.horizon,
            discount,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub n_pre: usize,
    pub n_off: usize,
    /// Masked rollouts per outer iteration.
    pub k: usize,
    pub safety_updates: usize,
    pub offline_capacity: usize,
    pub safe_capacity: usize,
    /// SAC updates start once the offline buffer holds this many transitions.
    pub learning_starts: usize,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            n_pre: 500,
            n_off: 100,
            k: 2,
            safety_updates: 10,
            offline_capacity: 100_000,
            safe_capacity: 5_000,
            learning_starts: 1_000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub n_target: usize,
    pub baseline: Baseline,
    pub online_safety_critic: bool,
    /// Environment steps between online safety-critic updates.
    pub safety_update_every: usize,
    pub safe_capacity: usize,
    pub offline_capacity: usize,
    pub learning_starts: usize,
    pub nu_init: f64,
    pub nu_lr: f64,
    /// Episodes in the trailing failure-rate window.
    pub window: usize,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            n_target: 10_000,
            baseline: Baseline::Sqrl,
            online_safety_critic: true,
            safety_update_every: 5,
            safe_capacity: 5_000,
            offline_capacity: 100_000,
            learning_starts: 256,
            nu_init: 0.0,
            nu_lr: 0.05,
            window: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SafetyConfig {
    pub eps_safe: f64,
    pub gamma_safe: f64,
    pub n_cand: usize,
    pub hidden: Vec<usize>,
    pub lr: f64,
    pub tau: f64,
    pub batch_size: usize,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        Self {
            eps_safe: 0.1,
            gamma_safe: 0.65,
            n_cand: 100,
            hidden: vec![64, 64],
            lr: 3e-4,
            tau: 0.005,
            batch_size: 128,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub episodes: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { episodes: 100 }
    }
}

/// Full run specification, loadable from TOML.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub env: EnvConfig,
    pub pretrain: PretrainConfig,
    pub finetune: FinetuneConfig,
    /// Keys missing from a `[sac]` section fall back to [`spider_sac`].
    #[serde(deserialize_with = "sac_over_spider_defaults")]
    pub sac: SacConfig,
    pub safety: SafetyConfig,
    pub eval: EvalConfig,
}

/// SAC settings for the drunk spider: the generic defaults with reward
/// discount 0.9. At 0.99 the learner tends to settle on parking or diving
/// before it ever finds the goal within the pre-training budget.
pub fn spider_sac() -> SacConfig {
    SacConfig {
        gamma: 0.9,
        ..Default::default()
    }
}

fn sac_over_spider_defaults<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<SacConfig, D::Error> {
    use serde::de::Error;
    let given = serde_json::Map::<String, serde_json::Value>::deserialize(d)?;
    let mut merged = match serde_json::to_value(spider_sac()).map_err(D::Error::custom)? {
        serde_json::Value::Object(m) => m,
        _ => unreachable!("SacConfig serializes to an object"),
    };
    merged.extend(given);
    serde_json::from_value(serde_json::Value::Object(merged)).map_err(D::Error::custom)
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: (0..5).collect(),
            out_dir: PathBuf::from("runs"),
            env: EnvConfig::default(),
            pretrain: PretrainConfig::default(),
            finetune: FinetuneConfig::default(),
            sac: spider_sac(),
            safety: SafetyConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| SqrlError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SqrlError::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SqrlError::Config(e.to_string()))
    }

    /// Reject inconsistent settings before any stepping happens.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(SqrlError::Config(m));
        let p = &self.pretrain;
        if p.n_pre == 0 || p.n_off == 0 || p.k == 0 {
            return bad(format!(
                "pretrain.n_pre, n_off and k must be positive (got {}, {}, {})",
                p.n_pre, p.n_off, p.k
            ));
        }
        if p.offline_capacity == 0 || p.safe_capacity == 0 {
            return bad("pretrain buffer capacities must be positive".into());
        }
        let f = &self.finetune;
        if f.n_target == 0 {
            return bad("finetune.n_target must be positive".into());
        }
        if f.safety_update_every == 0 || f.window == 0 || f.safe_capacity == 0 || f.offline_capacity == 0 {
            return bad("finetune.safety_update_every, window and capacities must be positive".into());
        }
        if !(f.nu_init >= 0.0) || !(f.nu_lr > 0.0) {
            return bad("finetune.nu_init must be >= 0 and nu_lr > 0".into());
        }
        let s = &self.safety;
        if !(s.eps_safe > 0.0 && s.eps_safe < 1.0) {
            return bad(format!("safety.eps_safe {} must lie in (0, 1)", s.eps_safe));
        }
        if !(s.gamma_safe > 0.0 && s.gamma_safe < 1.0) {
            return bad(format!("safety.gamma_safe {} must lie in (0, 1)", s.gamma_safe));
        }
        if s.n_cand == 0 || s.batch_size == 0 || s.hidden.contains(&0) {
            return bad("safety.n_cand, batch_size and hidden widths must be positive".into());
        }
        if !(s.lr > 0.0) || !(s.tau > 0.0 && s.tau <= 1.0) {
            return bad("safety.lr must be positive and tau in (0, 1]".into());
        }
        if self.eval.episodes == 0 {
            return bad("eval.episodes must be positive".into());
        }
        if !(self.env.pretrain_noise >= 0.0) || !(self.env.target_noise >= 0.0) {
            return bad("env noise levels must be >= 0".into());
        }
        self.env.task(self.env.pretrain_noise, self.sac.gamma).validate()?;
        self.sac.validate()
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let digest = Sha256::digest(&json);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn pretrain_task(&self) -> DrunkSpiderContinuous {
        self.env.task(self.env.pretrain_noise, self.sac.gamma)
    }

    pub fn target_task(&self) -> DrunkSpiderContinuous {
        self.env.task(self.env.target_noise, self.sac.gamma)
    }
}
