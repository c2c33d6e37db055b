use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::envs::{DrunkSpiderContinuous, SpiderLayout};
use crate::error::Result;
use crate::mdp::{checked_step, record_step, ReplayBuffer, RngStream, SafetyAwareTask, TerminalCause, Trajectory, Transition};
use crate::runner::agent::{AgentCheckpoint, SqrlAgent};
use crate::runner::config::{Baseline, ExperimentConfig};
use crate::runner::dual::DualState;
use crate::runner::metrics::{EpisodeTracker, MetricsRecord, Phase};
use crate::sac::{SacBatch, SacStats, SafetyTerm};
use crate::safety::{is_safe_action, jsafe_update, ExplorationMode, MaskedSamplingPolicy};

pub type SpiderTransition = Transition<[f64; 2], [f64; 2]>;

/// Safety-critic input: rescaled position followed by the action.
pub fn critic_input(task: &DrunkSpiderContinuous, s: &[f64; 2], a: &[f64; 2]) -> Vec<f64> {
    let f = task.features(s);
    vec![f[0], f[1], a[0], a[1]]
}

fn to_action(v: &[f64]) -> [f64; 2] {
    [v[0].clamp(-1.0, 1.0), v[1].clamp(-1.0, 1.0)]
}

/// SAC minibatch in feature coordinates, with `penalty[i]` subtracted from
/// each reward. With `absorbing`, a failed transition's reward becomes the
/// discounted sum of staying in the failure state forever.
pub fn sac_batch(
    task: &DrunkSpiderContinuous,
    items: &[&SpiderTransition],
    penalty: Option<&[f64]>,
    absorbing: bool,
) -> Result<SacBatch> {
    let n = items.len();
    let scale = |t: &SpiderTransition| if absorbing && t.failed { 1.0 / (1.0 - task.discount) } else { 1.0 };
    let obs = Array2::from_shape_fn((n, 2), |(i, j)| task.features(&items[i].state)[j]);
    let next = Array2::from_shape_fn((n, 2), |(i, j)| task.features(&items[i].next_state)[j]);
    let actions = Array2::from_shape_fn((n, 2), |(i, j)| items[i].action[j]);
    let rewards = Array1::from_shape_fn(n, |i| scale(items[i]) * (items[i].reward - penalty.map_or(0.0, |p| p[i])));
    let terminal = Array1::from_shape_fn(n, |i| if items[i].terminal() { 1.0 } else { 0.0 });
    SacBatch::new(obs, actions, rewards, next, terminal)
}

/// One safety-critic step on a minibatch from `buffer`, bootstrapping with
/// actions from the unconstrained policy.
pub fn safety_step(
    agent: &mut SqrlAgent,
    task: &DrunkSpiderContinuous,
    buffer: &ReplayBuffer<SpiderTransition>,
    batch_size: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    let mut pick = rng.split();
    let batch = buffer.sample(batch_size.min(buffer.len()), &mut pick)?;
    let SqrlAgent { sac, safety, .. } = agent;
    let policy = &sac.policy;
    jsafe_update(
        safety,
        &batch,
        |s, a| critic_input(task, s, a),
        |s, r| to_action(&policy.sample_action(&task.features(s), r).expect("policy input width is fixed").0),
        rng,
    )
}

/// One finished episode together with masking statistics.
#[derive(Clone, Debug)]
pub struct EpisodeSummary {
    pub trajectory: Trajectory<[f64; 2], [f64; 2]>,
    pub start: [f64; 2],
    pub fallbacks: usize,
    pub violations: usize,
    pub mean_qsafe: f64,
}

/// Run one episode with the agent's policy filtered through its safety
/// critic.
pub fn masked_episode(
    agent: &SqrlAgent,
    task: &DrunkSpiderContinuous,
    eps: f64,
    n_cand: usize,
    mode: ExplorationMode,
    rng: &mut RngStream,
) -> Result<EpisodeSummary> {
    let sampler = MaskedSamplingPolicy {
        base: &agent.sac.policy,
        risk: &agent.safety,
        eps_safe: eps,
        n_cand,
        mode,
    };
    let horizon = task.horizon();
    let start = task.initial_state(rng);
    let mut state = start;
    let mut transitions = Vec::with_capacity(horizon);
    let (mut fallbacks, mut violations, mut qsum) = (0, 0, 0.0);
    let mut cause = TerminalCause::Timeout;
    for t in 0..horizon {
        let obs = task.features(&state);
        let m = sampler.sample(&obs, rng)?;
        let a = to_action(&m.action);
        let q = match m.qsafe {
            Some(q) => q,
            None => agent.safety.predict(&critic_input(task, &state, &a))?,
        };
        qsum += q;
        fallbacks += m.fallback_used as usize;
        if mode != ExplorationMode::Plain && !m.fallback_used && !is_safe_action(&agent.safety, &obs, &a, eps)? {
            violations += 1;
        }
        let out = checked_step(task, &state, &a, t, rng)?;
        let tr = record_step::<DrunkSpiderContinuous>(state, a, out, t, horizon);
        state = tr.next_state;
        let end = if tr.failed {
            Some(TerminalCause::Failure)
        } else if tr.reached_goal {
            Some(TerminalCause::Goal)
        } else if tr.timed_out {
            Some(TerminalCause::Timeout)
        } else {
            None
        };
        transitions.push(tr);
        if let Some(c) = end {
            cause = c;
            break;
        }
    }
    let n = transitions.len().max(1) as f64;
    Ok(EpisodeSummary {
        trajectory: Trajectory { transitions, cause },
        start,
        fallbacks,
        violations,
        mean_qsafe: qsum / n,
    })
}

#[derive(Clone, Debug)]
pub struct PhaseOutput {
    pub agent: SqrlAgent,
    pub records: Vec<MetricsRecord>,
    pub sac_updates: usize,
    pub safety_updates: usize,
}

/// Tracks the live environment state across a stream of single steps.
struct Cursor {
    state: [f64; 2],
    t: usize,
    qsum: f64,
}

impl Cursor {
    fn reset(task: &DrunkSpiderContinuous, rng: &mut RngStream) -> Self {
        Self {
            state: task.initial_state(rng),
            t: 0,
            qsum: 0.0,
        }
    }
}

/// Pre-training: unmasked SAC steps into the offline buffer, then masked
/// riskiest-safe rollouts into the safety buffer, then safety-critic steps.
pub fn pretrain(config: &ExperimentConfig, seed: u64) -> Result<PhaseOutput> {
    config.validate()?;
    let root = RngStream::new(seed);
    let mut init = root.fork("init");
    let mut env_rng = root.fork("pretrain-env");
    let mut act_rng = root.fork("pretrain-act");
    let mut learn_rng = root.fork("pretrain-learn");
    let mut rollout_rng = root.fork("safety-rollout");
    let mut safety_rng = root.fork("pretrain-safety");
    let task = config.pretrain_task();
    let p = &config.pretrain;
    let s = &config.safety;
    let bs = config.sac.batch_size;
    let absorbing = config.env.absorbing_failures;
    let window = config.finetune.window;
    let mut agent = SqrlAgent::new(config, &mut init)?;
    let mut d_off = ReplayBuffer::new(p.offline_capacity);
    let mut d_safe = ReplayBuffer::new(p.safe_capacity);
    let mut tracker = EpisodeTracker::new(Phase::Pretrain, seed, window);
    let mut rollouts = EpisodeTracker::new(Phase::SafetyRollout, seed, window);
    let mut records = Vec::new();
    let mut cur = Cursor::reset(&task, &mut env_rng);
    let mut global = 0;
    let (mut sac_updates, mut safety_updates) = (0, 0);
    for iter in 0..p.n_pre {
        for _ in 0..p.n_off {
            let obs = task.features(&cur.state);
            let a = to_action(&agent.sac.policy.sample_action(&obs, &mut act_rng)?.0);
            cur.qsum += agent.safety.predict(&critic_input(&task, &cur.state, &a))?;
            let out = checked_step(&task, &cur.state, &a, cur.t, &mut env_rng)?;
            let tr = record_step::<DrunkSpiderContinuous>(cur.state, a, out, cur.t, task.horizon);
            global += 1;
            cur.t += 1;
            tracker.step(tr.reward, false, false);
            let (done, failed, next) = (tr.terminal() || tr.timed_out, tr.failed, tr.next_state);
            d_off.push(tr);
            if d_off.len() >= p.learning_starts {
                let batch = sac_batch(&task, &d_off.sample(bs.min(d_off.len()), &mut learn_rng)?, None, absorbing)?;
                agent.sac.update(&batch, &mut learn_rng, None)?;
                sac_updates += 1;
            }
            if done {
                let mean_q = cur.qsum / cur.t as f64;
                records.push(tracker.finish(failed, global, agent.sac.alpha(), agent.dual.nu, mean_q));
                cur = Cursor::reset(&task, &mut env_rng);
            } else {
                cur.state = next;
            }
        }
        for _ in 0..p.k {
            let ep = masked_episode(&agent, &task, s.eps_safe, s.n_cand, ExplorationMode::RiskiestSafe, &mut rollout_rng)?;
            for tr in &ep.trajectory.transitions {
                rollouts.step(tr.reward, false, false);
            }
            let mut rec = rollouts.finish(ep.trajectory.failed(), global, agent.sac.alpha(), agent.dual.nu, ep.mean_qsafe);
            rec.fallbacks = ep.fallbacks;
            rec.mask_violations = ep.violations;
            records.push(rec);
            d_safe.extend(ep.trajectory.transitions);
        }
        for _ in 0..p.safety_updates {
            safety_step(&mut agent, &task, &d_safe, s.batch_size, &mut safety_rng)?;
            safety_updates += 1;
        }
        if (iter + 1) % (p.n_pre / 10).max(1) == 0 {
            log::info!(
                "pretrain seed {seed}: iteration {}/{}, {} failures, {} rollout failures",
                iter + 1,
                p.n_pre,
                tracker.cumulative_failures(),
                rollouts.cumulative_failures()
            );
        }
    }
    Ok(PhaseOutput {
        agent,
        records,
        sac_updates,
        safety_updates,
    })
}

fn penalty_for(agent: &SqrlAgent, task: &DrunkSpiderContinuous, items: &[&SpiderTransition], nu: f64) -> Result<Vec<f64>> {
    let inputs: Vec<Vec<f64>> = items.iter().map(|t| critic_input(task, &t.state, &t.action)).collect();
    Ok(agent.safety.predict_rows(&inputs)?.into_iter().map(|q| nu * q).collect())
}

/// Fine-tune a copy of `pretrained` on the target task with the given
/// baseline and `config.safety.eps_safe`. Optimizer moments start fresh, so
/// the result is the same whether the agent came from memory or disk.
pub fn finetune(config: &ExperimentConfig, pretrained: &SqrlAgent, baseline: Baseline, seed: u64) -> Result<PhaseOutput> {
    config.validate()?;
    let root = RngStream::new(seed);
    let mut env_rng = root.fork("finetune-env");
    let mut act_rng = root.fork("finetune-act");
    let mut learn_rng = root.fork("finetune-learn");
    let mut safety_rng = root.fork("finetune-safety");
    let task = config.target_task();
    let f = &config.finetune;
    let s = &config.safety;
    let bs = config.sac.batch_size;
    let absorbing = config.env.absorbing_failures;
    let eps = s.eps_safe;
    let mut agent = AgentCheckpoint::from_agent(pretrained).into_agent()?;
    agent.dual = DualState::new(f.nu_init, f.nu_lr);
    let mut d_off = ReplayBuffer::new(f.offline_capacity);
    let mut d_safe = ReplayBuffer::new(f.safe_capacity);
    let mut tracker = EpisodeTracker::new(Phase::Finetune, seed, f.window);
    let mut records = Vec::new();
    let mut cur = Cursor::reset(&task, &mut env_rng);
    let (mut sac_updates, mut safety_updates) = (0, 0);
    for global in 1..=f.n_target {
        let obs = task.features(&cur.state);
        let (a, q, fallback, violation) = if baseline == Baseline::Sqrl {
            let sampler = MaskedSamplingPolicy {
                base: &agent.sac.policy,
                risk: &agent.safety,
                eps_safe: eps,
                n_cand: s.n_cand,
                mode: ExplorationMode::SafestAmong,
            };
            let m = sampler.sample(&obs, &mut act_rng)?;
            let a = to_action(&m.action);
            let violation = !m.fallback_used && !is_safe_action(&agent.safety, &obs, &a, eps)?;
            (a, m.qsafe.unwrap_or(0.0), m.fallback_used, violation)
        } else {
            let a = to_action(&agent.sac.policy.sample_action(&obs, &mut act_rng)?.0);
            let q = agent.safety.predict(&critic_input(&task, &cur.state, &a))?;
            (a, q, false, false)
        };
        cur.qsum += q;
        let out = checked_step(&task, &cur.state, &a, cur.t, &mut env_rng)?;
        let tr = record_step::<DrunkSpiderContinuous>(cur.state, a, out, cur.t, task.horizon);
        cur.t += 1;
        tracker.step(tr.reward, fallback, violation);
        let (done, failed, next) = (tr.terminal() || tr.timed_out, tr.failed, tr.next_state);
        d_safe.push(tr.clone());
        d_off.push(tr);

        if d_off.len() >= f.learning_starts {
            let items = d_off.sample(bs.min(d_off.len()), &mut learn_rng)?;
            sac_updates += 1;
            let stats: SacStats = match baseline {
                Baseline::Sac => {
                    let batch = sac_batch(&task, &items, None, absorbing)?;
                    agent.sac.update(&batch, &mut learn_rng, None)?
                }
                Baseline::Sqrl => {
                    let batch = sac_batch(&task, &items, None, absorbing)?;
                    let term = SafetyTerm {
                        critic: &agent.safety.net,
                        weight: agent.dual.nu,
                    };
                    agent.sac.update(&batch, &mut learn_rng, Some(term))?
                }
                Baseline::RiskSensitive => {
                    let pen = penalty_for(&agent, &task, &items, agent.dual.nu)?;
                    let batch = sac_batch(&task, &items, Some(&pen), absorbing)?;
                    let term = SafetyTerm {
                        critic: &agent.safety.net,
                        weight: 0.0,
                    };
                    agent.sac.update(&batch, &mut learn_rng, Some(term))?
                }
            };
            if let Some(mq) = stats.mean_qsafe {
                agent.dual.update(mq, eps);
            }
        }
        if baseline == Baseline::Sqrl && f.online_safety_critic && global % f.safety_update_every == 0 {
            safety_step(&mut agent, &task, &d_safe, s.batch_size, &mut safety_rng)?;
            safety_updates += 1;
        }
        if done {
            let mean_q = cur.qsum / cur.t as f64;
            records.push(tracker.finish(failed, global, agent.sac.alpha(), agent.dual.nu, mean_q));
            cur = Cursor::reset(&task, &mut env_rng);
        } else {
            cur.state = next;
        }
        if global % (f.n_target / 10).max(1) == 0 {
            log::info!(
                "finetune {baseline} seed {seed}: step {global}/{}, {} failures, nu {:.4}",
                f.n_target,
                tracker.cumulative_failures(),
                agent.dual.nu
            );
        }
    }
    Ok(PhaseOutput {
        agent,
        records,
        sac_updates,
        safety_updates,
    })
}

/// Pre-train, then fine-tune with `baseline`.
pub fn run_baseline(config: &ExperimentConfig, baseline: Baseline, seed: u64) -> Result<PhaseOutput> {
    let pre = pretrain(config, seed)?;
    let mut out = finetune(config, &pre.agent, baseline, seed)?;
    let mut records = pre.records;
    records.append(&mut out.records);
    Ok(PhaseOutput {
        agent: out.agent,
        records,
        sac_updates: pre.sac_updates + out.sac_updates,
        safety_updates: pre.safety_updates + out.safety_updates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathClass {
    Bridge,
    Around,
    Neither,
}

/// `Bridge` if any visited position lies in the bridge corridor, `Around`
/// if the path gets past the pits' right edge without touching it.
pub fn classify_path(layout: &SpiderLayout, start: [f64; 2], trajectory: &Trajectory<[f64; 2], [f64; 2]>) -> PathClass {
    let visited = || std::iter::once(start).chain(trajectory.transitions.iter().map(|t| t.next_state));
    if visited().any(|p| layout.in_bridge(p)) {
        PathClass::Bridge
    } else if visited().any(|p| p[0] > layout.bridge.x1) {
        PathClass::Around
    } else {
        PathClass::Neither
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub episodes: usize,
    pub bridge: usize,
    pub around: usize,
    pub neither: usize,
    pub failures: usize,
    pub goals: usize,
    pub mean_return: f64,
    pub fallbacks: usize,
    pub mask_violations: usize,
}

impl EvalSummary {
    pub fn fraction(&self, class: PathClass) -> f64 {
        let n = match class {
            PathClass::Bridge => self.bridge,
            PathClass::Around => self.around,
            PathClass::Neither => self.neither,
        };
        n as f64 / self.episodes.max(1) as f64
    }
}

/// Roll out `episodes` masked trajectories on `task` with threshold
/// `eps_action` and tally path classes.
pub fn evaluate(
    agent: &SqrlAgent,
    task: &DrunkSpiderContinuous,
    eps_action: f64,
    n_cand: usize,
    episodes: usize,
    seed: u64,
) -> Result<(EvalSummary, Vec<MetricsRecord>)> {
    let mut rng = RngStream::new(seed).fork("evaluate");
    let mut tracker = EpisodeTracker::new(Phase::Evaluate, seed, episodes);
    let mut summary = EvalSummary {
        episodes,
        ..Default::default()
    };
    let mut records = Vec::with_capacity(episodes);
    let mut total = 0.0;
    for _ in 0..episodes {
        let ep = masked_episode(agent, task, eps_action, n_cand, ExplorationMode::SafestAmong, &mut rng)?;
        match classify_path(&task.layout, ep.start, &ep.trajectory) {
            PathClass::Bridge => summary.bridge += 1,
            PathClass::Around => summary.around += 1,
            PathClass::Neither => summary.neither += 1,
        }
        summary.failures += ep.trajectory.failed() as usize;
        summary.goals += (ep.trajectory.cause == TerminalCause::Goal) as usize;
        summary.fallbacks += ep.fallbacks;
        summary.mask_violations += ep.violations;
        total += ep.trajectory.total_reward();
        for tr in &ep.trajectory.transitions {
            tracker.step(tr.reward, false, false);
        }
        let mut rec = tracker.finish(ep.trajectory.failed(), 0, agent.sac.alpha(), agent.dual.nu, ep.mean_qsafe);
        rec.fallbacks = ep.fallbacks;
        rec.mask_violations = ep.violations;
        records.push(rec);
    }
    summary.mean_return = total / episodes.max(1) as f64;
    Ok((summary, records))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.sac.hidden = vec![8];
        cfg.sac.batch_size = 16;
        cfg.safety.hidden = vec![8];
        cfg.safety.batch_size = 16;
        cfg.safety.n_cand = 8;
        cfg.pretrain.n_pre = 3;
        cfg.pretrain.n_off = 20;
        cfg.pretrain.learning_starts = 16;
        cfg.finetune.n_target = 60;
        cfg.finetune.learning_starts = 16;
        cfg
    }

    fn path(points: &[[f64; 2]]) -> Trajectory<[f64; 2], [f64; 2]> {
        let transitions = points
            .iter()
            .map(|&p| Transition {
                state: [0.0, 0.0],
                action: [0.0, 0.0],
                reward: 0.0,
                next_state: p,
                failed: false,
                reached_goal: false,
                timed_out: false,
            })
            .collect();
        Trajectory {
            transitions,
            cause: TerminalCause::Timeout,
        }
    }

    #[test]
    fn path_classes() {
        let layout = SpiderLayout::default();
        let start = [1.0, 5.0];
        assert_eq!(classify_path(&layout, start, &path(&[[3.0, 5.0], [4.0, 5.0], [7.0, 5.0]])), PathClass::Bridge);
        assert_eq!(classify_path(&layout, start, &path(&[[2.0, 9.0], [5.0, 9.0], [7.0, 9.0]])), PathClass::Around);
        assert_eq!(classify_path(&layout, start, &path(&[[2.0, 5.0], [3.0, 5.0]])), PathClass::Neither);
        // a path that dips into the corridor on the way around still counts as the bridge
        assert_eq!(classify_path(&layout, start, &path(&[[4.0, 5.0], [4.0, 9.0], [7.0, 9.0]])), PathClass::Bridge);
    }

    #[test]
    fn pretrain_is_deterministic_and_logs_every_episode() {
        let cfg = tiny_config();
        let a = pretrain(&cfg, 4).unwrap();
        let b = pretrain(&cfg, 4).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.agent.sac.policy.net, b.agent.sac.policy.net);
        let rollouts = a.records.iter().filter(|r| r.phase == Phase::SafetyRollout).count();
        assert_eq!(rollouts, cfg.pretrain.n_pre * cfg.pretrain.k);
        assert!(a.records.iter().all(|r| r.mask_violations == 0));
    }

    #[test]
    fn finetune_from_memory_matches_from_disk() {
        let cfg = tiny_config();
        let pre = pretrain(&cfg, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agent.json");
        pre.agent.save(&path).unwrap();
        let loaded = SqrlAgent::load(&path).unwrap();
        for baseline in [Baseline::Sqrl, Baseline::Sac, Baseline::RiskSensitive] {
            let a = finetune(&cfg, &pre.agent, baseline, 6).unwrap();
            let b = finetune(&cfg, &loaded, baseline, 6).unwrap();
            assert_eq!(a.records, b.records, "{baseline}");
            let steps: usize = a.records.iter().map(|r| r.length).sum();
            assert!(steps <= cfg.finetune.n_target);
            assert!(a.records.iter().all(|r| r.mask_violations == 0));
        }
    }

    #[test]
    fn single_iteration_structure() {
        let mut cfg = tiny_config();
        cfg.pretrain.n_pre = 1;
        cfg.pretrain.n_off = 1;
        cfg.pretrain.k = 1;
        cfg.pretrain.safety_updates = 1;
        cfg.pretrain.learning_starts = 1;
        let out = pretrain(&cfg, 0).unwrap();
        assert_eq!(out.sac_updates, 1);
        assert_eq!(out.safety_updates, 1);
        assert_eq!(out.records.iter().filter(|r| r.phase == Phase::SafetyRollout).count(), 1);
    }

    #[test]
    fn sac_baseline_never_falls_back() {
        let cfg = tiny_config();
        let pre = pretrain(&cfg, 7).unwrap();
        let out = finetune(&cfg, &pre.agent, Baseline::Sac, 7).unwrap();
        assert!(out.records.iter().all(|r| r.fallbacks == 0 && r.nu == 0.0));
        assert_eq!(out.safety_updates, 0);
        assert_eq!(out.agent.safety.net, pre.agent.safety.net);
    }

    #[test]
    fn risk_sensitive_with_zero_multiplier_is_plain_sac() {
        let mut cfg = tiny_config();
        // constraint never binds, so the multiplier stays at zero
        cfg.safety.eps_safe = 0.999;
        let pre = pretrain(&cfg, 8).unwrap();
        let a = finetune(&cfg, &pre.agent, Baseline::Sac, 9).unwrap();
        let b = finetune(&cfg, &pre.agent, Baseline::RiskSensitive, 9).unwrap();
        assert!(b.records.iter().all(|r| r.nu == 0.0));
        assert_eq!(a.records, b.records);
        assert_eq!(a.agent.sac.policy.net, b.agent.sac.policy.net);
    }

    #[test]
    fn frozen_safety_critic_stays_fixed() {
        let mut cfg = tiny_config();
        cfg.finetune.online_safety_critic = false;
        let pre = pretrain(&cfg, 10).unwrap();
        let out = finetune(&cfg, &pre.agent, Baseline::Sqrl, 10).unwrap();
        assert_eq!(out.agent.safety.net, pre.agent.safety.net);
        assert!(out.records.iter().all(|r| r.nu >= 0.0 && r.alpha > 0.0));
    }

    #[test]
    fn evaluation_counts_add_up() {
        let cfg = tiny_config();
        let agent = SqrlAgent::new(&cfg, &mut RngStream::new(1)).unwrap();
        let (s, recs) = evaluate(&agent, &cfg.target_task(), 0.2, 8, 12, 3).unwrap();
        assert_eq!(s.bridge + s.around + s.neither, 12);
        assert_eq!(recs.len(), 12);
        assert_eq!(s.mask_violations, 0);
    }
}
