//! Experiment driver for the drunk-spider transfer task: configuration,
//! pre-training, fine-tuning, evaluation and metrics files.

mod agent;
mod config;
mod dual;
mod experiment;
mod gradcheck;
mod metrics;

pub use agent::{AgentCheckpoint, SqrlAgent, AGENT_FORMAT};
pub use config::{Baseline, EnvConfig, EvalConfig, ExperimentConfig, FinetuneConfig, PretrainConfig, SafetyConfig, spider_sac};
pub use dual::DualState;
pub use experiment::{
    classify_path, critic_input, evaluate, finetune, masked_episode, pretrain, run_baseline, sac_batch, safety_step,
    EpisodeSummary, EvalSummary, PathClass, PhaseOutput, SpiderTransition,
};
pub use gradcheck::{gradient_suite, NetworkCheck};
pub use metrics::{
    check_monotone, emit_metrics, manifest_path, merge_metrics, read_metrics, EpisodeTracker, MetricsRecord, Phase,
    RunManifest,
};
