//! Safety critic training and the masked sampling policy built on it.

mod critic;
mod masked;

pub use critic::{jsafe_update, safety_bellman_target, SafetyCritic, SafetyOutcome};
pub use masked::{
    is_safe, is_safe_action, select_masked, select_riskiest_safe, ExplorationMode, FnRisk, MaskedSample,
    MaskedSamplingPolicy, RiskModel,
};
