use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use sqrl::envs::{generate_assumption_mdp, TabularMdp};
use sqrl::oracle::{verify_theorem, TabularPolicy};
use sqrl::runner::{
    emit_metrics, evaluate, finetune, gradient_suite, merge_metrics, pretrain, Baseline, ExperimentConfig,
    RunManifest, SqrlAgent,
};

#[derive(Parser, Debug)]
#[command(name = "sqrl", version, about = "Safety Q-functions for transfer RL on the drunk-spider task")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// TOML experiment config; defaults apply to anything missing.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    eps_safe: Option<f64>,
    #[arg(long)]
    gamma_safe: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Pre-train policy and safety critic on the source task.
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Total environment steps; rounded down to whole outer iterations.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Fine-tune a pre-trained agent on the target task.
    Finetune {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, default_value = "sqrl")]
        baseline: String,
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Roll out masked trajectories and tally bridge/around paths.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Use the pre-training noise level instead of the target one.
        #[arg(long)]
        source_task: bool,
        #[arg(long)]
        episodes: Option<usize>,
    },
    /// Check the masked-policy failure bound on tabular MDPs.
    OracleCheck {
        /// Tabular MDP JSON document; random assumption-satisfying MDPs
        /// are generated when omitted.
        #[arg(long)]
        mdp: Option<PathBuf>,
        #[arg(long, default_value_t = 0.1)]
        eps_safe: f64,
        #[arg(long, default_value_t = 0.65)]
        gamma_safe: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Finite-difference check of every network's gradient.
    Gradcheck {
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Concatenate per-seed metrics files.
    MergeMetrics {
        #[arg(long)]
        out: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &common.out {
        cfg.out_dir = o.clone();
    }
    if let Some(e) = common.eps_safe {
        cfg.safety.eps_safe = e;
    }
    if let Some(g) = common.gamma_safe {
        cfg.safety.gamma_safe = g;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn seed_dir(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    cfg.out_dir.join(format!("seed-{seed}"))
}

fn write_metrics(cfg: &ExperimentConfig, seed: u64, path: &Path, records: &[sqrl::runner::MetricsRecord]) -> Result<()> {
    emit_metrics(records, path, &RunManifest::new(cfg.hash(), seed))?;
    log::info!("wrote {} records to {}", records.len(), path.display());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Pretrain { common, steps } => {
            let mut cfg = load_config(&common)?;
            if let Some(n) = steps {
                cfg.pretrain.n_pre = n / cfg.pretrain.n_off;
                if cfg.pretrain.n_pre == 0 {
                    bail!("--steps {n} is below one outer iteration ({} steps)", cfg.pretrain.n_off);
                }
            }
            cfg.validate()?;
            for &seed in &cfg.seeds {
                let out = pretrain(&cfg, seed)?;
                let dir = seed_dir(&cfg, seed);
                out.agent.save(&dir.join("pretrained.json"))?;
                write_metrics(&cfg, seed, &dir.join("pretrain.jsonl"), &out.records)?;
                let failures = out.records.iter().filter(|r| r.failed).count();
                println!("seed {seed}: {} episodes, {failures} failures", out.records.len());
            }
        }
        Command::Finetune {
            common,
            checkpoint,
            baseline,
            steps,
        } => {
            let mut cfg = load_config(&common)?;
            let baseline: Baseline = baseline.parse()?;
            cfg.finetune.baseline = baseline;
            if let Some(n) = steps {
                cfg.finetune.n_target = n;
            }
            cfg.validate()?;
            let agent = SqrlAgent::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            for &seed in &cfg.seeds {
                let out = finetune(&cfg, &agent, baseline, seed)?;
                let dir = seed_dir(&cfg, seed);
                out.agent.save(&dir.join(format!("finetuned-{baseline}.json")))?;
                write_metrics(&cfg, seed, &dir.join(format!("finetune-{baseline}.jsonl")), &out.records)?;
                let last = out.records.last();
                println!(
                    "seed {seed} {baseline}: {} failures, trailing rate {:.3}",
                    last.map_or(0, |r| r.cumulative_failures),
                    last.map_or(0.0, |r| r.trailing_failure_rate)
                );
            }
        }
        Command::Evaluate {
            common,
            checkpoint,
            source_task,
            episodes,
        } => {
            let cfg = load_config(&common)?;
            let agent = SqrlAgent::load(&checkpoint).with_context(|| format!("loading {}", checkpoint.display()))?;
            let task = if source_task { cfg.pretrain_task() } else { cfg.target_task() };
            let n = episodes.unwrap_or(cfg.eval.episodes);
            for &seed in &cfg.seeds {
                let (summary, records) = evaluate(&agent, &task, cfg.safety.eps_safe, cfg.safety.n_cand, n, seed)?;
                write_metrics(&cfg, seed, &seed_dir(&cfg, seed).join("evaluate.jsonl"), &records)?;
                println!("{}", serde_json::to_string(&summary)?);
            }
        }
        Command::OracleCheck {
            mdp,
            eps_safe,
            gamma_safe,
            seed,
            count,
        } => {
            let tasks: Vec<TabularMdp> = match mdp {
                Some(p) => vec![TabularMdp::load_json(&p)?],
                None => (0..count as u64)
                    .map(|i| generate_assumption_mdp(4 + (i as usize % 17), 2 + (i as usize % 3), eps_safe, seed + i).map(|r| r.mdp))
                    .collect::<sqrl::Result<_>>()?,
            };
            let mut violations = 0;
            for (i, m) in tasks.iter().enumerate() {
                let base = TabularPolicy::uniform(m.n_states(), m.n_actions());
                let report = verify_theorem(m, &base, gamma_safe, eps_safe)?;
                violations += report.is_violation() as usize;
                println!("{i}: {}", serde_json::to_string(&report)?);
            }
            if violations > 0 {
                bail!("{violations} bound violations");
            }
        }
        Command::Gradcheck {
            instances,
            tolerance,
            seed,
        } => {
            let checks = gradient_suite(instances, &[32, 32], 8, tolerance, seed);
            let failed: Vec<_> = checks.iter().filter(|c| !c.report.passed).collect();
            let worst = checks.iter().map(|c| c.report.worst_rel_error).fold(0.0, f64::max);
            println!("{} checks, {} failed, worst relative error {worst:.3e}", checks.len(), failed.len());
            for c in &failed {
                println!("{} #{}: {:?}", c.network, c.instance, c.report);
            }
            if !failed.is_empty() {
                bail!("gradient check failed");
            }
        }
        Command::MergeMetrics { out, inputs } => {
            let n = merge_metrics(&inputs, &out)?;
            println!("merged {n} records into {}", out.display());
        }
    }
    Ok(())
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SQRL_LOG", "warn")).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
