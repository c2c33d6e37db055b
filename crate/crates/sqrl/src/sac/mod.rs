//! Maximum-entropy actor-critic: squashed-Gaussian policy, twin critics
//! with delayed targets and automatic temperature tuning.

mod agent;
mod policy;

pub use agent::{
    obs_action_input, policy_objective, squared_error, CriticLoss, PolicyLoss, PolicyObjective, Sac, SacBatch,
    SacConfig, SacStats, SafetyTerm, Temperature, TwinCritics,
};
pub use policy::{PolicySample, SquashedGaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
