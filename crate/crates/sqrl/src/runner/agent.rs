use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::envs::{ACT_DIM, OBS_DIM};
use crate::error::{Result, SqrlError};
use crate::mdp::RngStream;
use crate::nn::{Mlp, MlpCheckpoint};
use crate::runner::config::{ExperimentConfig, SafetyConfig};
use crate::runner::dual::DualState;
use crate::sac::{Sac, SacConfig, SquashedGaussianPolicy, Temperature, TwinCritics};
use crate::safety::SafetyCritic;

pub const AGENT_FORMAT: &str = "sqrl-agent/1";

const ROLES: [&str; 7] = ["policy", "q1", "q2", "q1_target", "q2_target", "safety", "safety_target"];

/// Everything a fine-tuning run starts from: SAC learner, safety critic
/// and the dual multiplier.
#[derive(Clone, Debug)]
pub struct SqrlAgent {
    pub sac: Sac,
    pub safety: SafetyCritic,
    pub dual: DualState,
}

impl SqrlAgent {
    pub fn new(config: &ExperimentConfig, rng: &mut RngStream) -> Result<Self> {
        let mut sac_cfg = config.sac.clone();
        sac_cfg.action_scale = 1.0;
        let sac = Sac::new(OBS_DIM, ACT_DIM, sac_cfg, rng)?;
        let s = &config.safety;
        let safety = SafetyCritic::new(OBS_DIM + ACT_DIM, &s.hidden, s.gamma_safe, s.lr, s.tau, rng)?;
        Ok(Self {
            sac,
            safety,
            dual: DualState::new(config.finetune.nu_init, config.finetune.nu_lr),
        })
    }

    pub fn policy(&self) -> &SquashedGaussianPolicy {
        &self.sac.policy
    }

    /// Write all networks and scalars to one JSON file. Optimizer moments
    /// are not stored.
    pub fn save(&self, path: &Path) -> Result<()> {
        let ckpt = AgentCheckpoint::from_agent(self);
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| SqrlError::io(dir, e))?;
        }
        fs::write(path, serde_json::to_string(&ckpt)?).map_err(|e| SqrlError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(SqrlError::MissingCheckpoint(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| SqrlError::io(path, e))?;
        let ckpt: AgentCheckpoint = serde_json::from_str(&text)?;
        ckpt.into_agent()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub format: String,
    pub networks: BTreeMap<String, MlpCheckpoint>,
    pub log_alpha: f64,
    pub target_entropy: f64,
    pub nu: f64,
    pub nu_lr: f64,
    pub gamma_safe: f64,
    pub sac: SacConfig,
    pub safety: SafetyConfig,
}

impl AgentCheckpoint {
    pub fn from_agent(agent: &SqrlAgent) -> Self {
        let c = &agent.sac.critics;
        let nets: [&Mlp; 7] = [
            &agent.sac.policy.net,
            &c.q1,
            &c.q2,
            &c.q1_target,
            &c.q2_target,
            &agent.safety.net,
            &agent.safety.target,
        ];
        let networks = ROLES
            .iter()
            .zip(nets)
            .map(|(r, n)| (r.to_string(), MlpCheckpoint::from(n)))
            .collect();
        let safety = SafetyConfig {
            gamma_safe: agent.safety.gamma_safe,
            tau: agent.safety.tau,
            lr: agent.safety.lr(),
            hidden: agent.safety.net.sizes()[1..agent.safety.net.sizes().len() - 1].to_vec(),
            ..Default::default()
        };
        Self {
            format: AGENT_FORMAT.to_string(),
            networks,
            log_alpha: agent.sac.temperature.log_alpha,
            target_entropy: agent.sac.temperature.target_entropy,
            nu: agent.dual.nu,
            nu_lr: agent.dual.lr,
            gamma_safe: agent.safety.gamma_safe,
            sac: agent.sac.config.clone(),
            safety,
        }
    }

    pub fn into_agent(mut self) -> Result<SqrlAgent> {
        if self.format != AGENT_FORMAT {
            return Err(SqrlError::Checkpoint(format!(
                "unsupported agent format {:?}, expected {AGENT_FORMAT:?}",
                self.format
            )));
        }
        let mut take = |role: &str| -> Result<Mlp> {
            self.networks
                .remove(role)
                .ok_or_else(|| SqrlError::Checkpoint(format!("missing network role {role:?}")))?
                .into_mlp()
        };
        let policy = take("policy")?;
        let critics = TwinCritics {
            q1: take("q1")?,
            q2: take("q2")?,
            q1_target: take("q1_target")?,
            q2_target: take("q2_target")?,
        };
        let (safety_net, safety_target) = (take("safety")?, take("safety_target")?);
        let mut temperature = Temperature::new(1.0, self.target_entropy, self.sac.lr);
        temperature.log_alpha = self.log_alpha;
        let policy = SquashedGaussianPolicy::from_net(policy, self.sac.action_scale);
        let sac = Sac::from_parts(policy, critics, temperature, self.sac);
        let safety = SafetyCritic::from_nets(safety_net, safety_target, self.gamma_safe, self.safety.lr, self.safety.tau);
        Ok(SqrlAgent {
            sac,
            safety,
            dual: DualState::new(self.nu, self.nu_lr),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.sac.hidden = vec![6];
        cfg.safety.hidden = vec![5];
        cfg
    }

    #[test]
    fn save_load_is_bit_exact() {
        let cfg = small_config();
        let mut agent = SqrlAgent::new(&cfg, &mut RngStream::new(1)).unwrap();
        agent.dual.nu = 0.123456789;
        agent.sac.temperature.log_alpha = -1.2345;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a/agent.json");
        agent.save(&path).unwrap();
        let back = SqrlAgent::load(&path).unwrap();
        assert_eq!(back.sac.policy.net, agent.sac.policy.net);
        assert_eq!(back.sac.critics.q2_target, agent.sac.critics.q2_target);
        assert_eq!(back.safety.net, agent.safety.net);
        assert_eq!(back.safety.target, agent.safety.target);
        assert_eq!(back.dual, agent.dual);
        assert_eq!(back.sac.temperature.log_alpha, agent.sac.temperature.log_alpha);
        assert_eq!(back.safety.gamma_safe, 0.65);
    }

    #[test]
    fn missing_file_and_bad_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("none.json");
        assert!(matches!(SqrlAgent::load(&path), Err(SqrlError::MissingCheckpoint(_))));
        let agent = SqrlAgent::new(&small_config(), &mut RngStream::new(2)).unwrap();
        let mut ckpt = AgentCheckpoint::from_agent(&agent);
        ckpt.networks.remove("q2");
        assert!(matches!(ckpt.clone().into_agent(), Err(SqrlError::Checkpoint(_))));
        ckpt.format = "other/9".into();
        assert!(matches!(ckpt.into_agent(), Err(SqrlError::Checkpoint(_))));
    }
}
