//! Exact dynamic programming on finite safety-aware tasks.
//!
//! Failure states are absorbing with value 1 and goal states are terminals
//! with value 0, so every quantity here is the infinite-horizon discounted
//! failure probability. Truncating to an episode of length `T` changes it
//! by at most `gamma_safe^T`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::envs::{check_assumptions, AssumptionReport, TabularMdp};
use crate::error::{Result, SqrlError};
use crate::mdp::RngStream;

pub const DEFAULT_TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 1_000_000;

/// Row-stochastic policy matrix `pi(a|s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions {
            return Err(SqrlError::DimensionMismatch {
                expected: n_states * n_actions,
                got: probs.len(),
            });
        }
        for s in 0..n_states {
            let row = &probs[s * n_actions..(s + 1) * n_actions];
            let sum: f64 = row.iter().sum();
            if row.iter().any(|&p| !(p >= 0.0)) || (sum - 1.0).abs() > 1e-12 {
                return Err(SqrlError::NonStochastic { row: s, sum });
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    /// Random full-support policy.
    pub fn random(n_states: usize, n_actions: usize, rng: &mut RngStream) -> Self {
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            let w: Vec<f64> = (0..n_actions).map(|_| -(1.0 - rng.uniform()).ln() + 1e-3).collect();
            let sum: f64 = w.iter().sum();
            probs.extend(w.iter().map(|x| x / sum));
        }
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn sample(&self, s: usize, rng: &mut RngStream) -> usize {
        rng.categorical(self.row(s))
    }

    fn support(&self) -> Vec<bool> {
        self.probs.iter().map(|&p| p > 0.0).collect()
    }
}

/// `Q_safe(s, a)` for a fixed policy and safety discount.
#[derive(Clone, Debug, PartialEq)]
pub struct QsafeTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
    pub gamma_safe: f64,
}

impl QsafeTable {
    pub fn from_values(n_states: usize, n_actions: usize, values: Vec<f64>, gamma_safe: f64) -> Result<Self> {
        if values.len() != n_states * n_actions {
            return Err(SqrlError::DimensionMismatch {
                expected: n_states * n_actions,
                got: values.len(),
            });
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
            gamma_safe,
        })
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

fn check_shapes(mdp: &TabularMdp, policy: &TabularPolicy) -> Result<()> {
    if policy.n_states != mdp.n_states() {
        return Err(SqrlError::DimensionMismatch {
            expected: mdp.n_states(),
            got: policy.n_states,
        });
    }
    if policy.n_actions != mdp.n_actions() {
        return Err(SqrlError::DimensionMismatch {
            expected: mdp.n_actions(),
            got: policy.n_actions,
        });
    }
    Ok(())
}

/// State value implied by `q` under `policy`: 1 at failures, 0 at goals.
fn state_values(mdp: &TabularMdp, policy: &TabularPolicy, q: &[f64]) -> Vec<f64> {
    let na = mdp.n_actions();
    (0..mdp.n_states())
        .map(|s| {
            if mdp.is_unsafe(s) {
                1.0
            } else if mdp.is_goal(s) {
                0.0
            } else {
                policy.row(s).iter().zip(&q[s * na..(s + 1) * na]).map(|(p, v)| p * v).sum()
            }
        })
        .collect()
}

fn bellman_backup(mdp: &TabularMdp, gamma_safe: f64, v: &[f64], s: usize, a: usize) -> f64 {
    if mdp.is_unsafe(s) {
        1.0
    } else if mdp.is_goal(s) {
        0.0
    } else {
        gamma_safe * mdp.row(s, a).iter().zip(v).map(|(p, x)| p * x).sum::<f64>()
    }
}

/// Solve `Q(s,a) = I(s) + (1 - I(s)) * gamma_safe * E[Q(s', a')]` by
/// fixed-point iteration until the sup-norm change drops below `tol`.
pub fn exact_qsafe(mdp: &TabularMdp, policy: &TabularPolicy, gamma_safe: f64, tol: f64) -> Result<QsafeTable> {
    check_shapes(mdp, policy)?;
    if !(0.0..1.0).contains(&gamma_safe) {
        return Err(SqrlError::Config(format!("gamma_safe {gamma_safe} outside [0, 1)")));
    }
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let mut q: Vec<f64> = (0..ns * na).map(|i| if mdp.is_unsafe(i / na) { 1.0 } else { 0.0 }).collect();
    for _ in 0..MAX_SWEEPS {
        let v = state_values(mdp, policy, &q);
        let mut delta: f64 = 0.0;
        for s in 0..ns {
            for a in 0..na {
                let new = bellman_backup(mdp, gamma_safe, &v, s, a);
                delta = delta.max((new - q[s * na + a]).abs());
                q[s * na + a] = new;
            }
        }
        if delta < tol {
            break;
        }
    }
    QsafeTable::from_values(ns, na, q, gamma_safe)
}

/// Sup-norm residual of `q` against its own Bellman equation.
pub fn bellman_residual(mdp: &TabularMdp, policy: &TabularPolicy, q: &QsafeTable) -> f64 {
    let na = mdp.n_actions();
    let v = state_values(mdp, policy, &q.values);
    let mut worst: f64 = 0.0;
    for s in 0..mdp.n_states() {
        for a in 0..na {
            worst = worst.max((bellman_backup(mdp, q.gamma_safe, &v, s, a) - q.get(s, a)).abs());
        }
    }
    worst
}

/// A policy masked by a safety table: `pi_bar(a|s) ∝ 1[Q(s,a) < eps] pi(a|s)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MaskedTabularPolicy {
    pub policy: TabularPolicy,
    /// `Z(s) = sum_a 1[Q(s,a) < eps] pi(a|s)`.
    pub normalizer: Vec<f64>,
    /// States where `Z(s) = 0`; the policy there is a point mass on the
    /// safest supported action.
    pub flagged: Vec<usize>,
    pub eps: f64,
}

pub fn mask_exact(base: &TabularPolicy, qsafe: &QsafeTable, eps: f64) -> MaskedTabularPolicy {
    let (ns, na) = (base.n_states, base.n_actions);
    let mut probs = vec![0.0; ns * na];
    let mut normalizer = Vec::with_capacity(ns);
    let mut flagged = Vec::new();
    for s in 0..ns {
        let pi = base.row(s);
        let q = qsafe.row(s);
        let z: f64 = (0..na).filter(|&a| q[a] < eps).map(|a| pi[a]).sum();
        normalizer.push(z);
        let out = &mut probs[s * na..(s + 1) * na];
        if (0..na).all(|a| pi[a] == 0.0 || q[a] < eps) {
            out.copy_from_slice(pi);
        } else if z > 0.0 {
            for a in 0..na {
                if q[a] < eps {
                    out[a] = pi[a] / z;
                }
            }
        } else {
            flagged.push(s);
            let safest = (0..na)
                .filter(|&a| pi[a] > 0.0)
                .min_by(|&x, &y| q[x].total_cmp(&q[y]))
                .unwrap_or(0);
            out[safest] = 1.0;
        }
    }
    MaskedTabularPolicy {
        policy: TabularPolicy {
            n_states: ns,
            n_actions: na,
            probs,
        },
        normalizer,
        flagged,
        eps,
    }
}

/// [`mask_exact`] restricted to non-terminal states. The action choice at
/// failure and goal states has no effect, so the base row is kept there and
/// no fallback is recorded.
pub fn mask_on_mdp(mdp: &TabularMdp, base: &TabularPolicy, qsafe: &QsafeTable, eps: f64) -> MaskedTabularPolicy {
    let mut m = mask_exact(base, qsafe, eps);
    let na = base.n_actions;
    for s in (0..base.n_states).filter(|&s| mdp.is_terminal(s)) {
        m.policy.probs[s * na..(s + 1) * na].copy_from_slice(base.row(s));
    }
    m.flagged.retain(|&s| !mdp.is_terminal(s));
    m
}

/// Per-state discounted failure value `V(s)` by a direct linear solve.
pub fn exact_failure_values(mdp: &TabularMdp, policy: &TabularPolicy, gamma_safe: f64) -> Result<Vec<f64>> {
    check_shapes(mdp, policy)?;
    let n = mdp.n_states();
    let mut m = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        if mdp.is_unsafe(s) {
            rhs[s] = 1.0;
            continue;
        }
        if mdp.is_goal(s) {
            continue;
        }
        for a in 0..mdp.n_actions() {
            let pa = policy.prob(s, a);
            if pa == 0.0 {
                continue;
            }
            for (next, &p) in mdp.row(s, a).iter().enumerate() {
                m[(s, next)] -= gamma_safe * pa * p;
            }
        }
    }
    let v = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| SqrlError::Invariant("policy evaluation system is singular".into()))?;
    Ok(v.iter().copied().collect())
}

/// `E_{s0 ~ mu}[sum_t gamma_safe^t I(s_t)]` under `policy`.
pub fn exact_failure_value(mdp: &TabularMdp, policy: &TabularPolicy, gamma_safe: f64) -> Result<f64> {
    let v = exact_failure_values(mdp, policy, gamma_safe)?;
    Ok(mdp.initial().iter().zip(&v).map(|(m, x)| m * x).sum())
}

/// States reachable from the support of `mu` under `policy`, not expanding
/// through terminals.
pub fn reachable_states(mdp: &TabularMdp, policy: &TabularPolicy) -> Vec<bool> {
    let n = mdp.n_states();
    let mut seen = vec![false; n];
    let mut queue: VecDeque<usize> = (0..n).filter(|&s| mdp.initial()[s] > 0.0).collect();
    for &s in &queue {
        seen[s] = true;
    }
    while let Some(s) = queue.pop_front() {
        if mdp.is_terminal(s) {
            continue;
        }
        for a in (0..mdp.n_actions()).filter(|&a| policy.prob(s, a) > 0.0) {
            for (next, &p) in mdp.row(s, a).iter().enumerate() {
                if p > 0.0 && !seen[next] {
                    seen[next] = true;
                    queue.push_back(next);
                }
            }
        }
    }
    seen
}

#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub masked: MaskedTabularPolicy,
    /// `Q_safe` of `masked.policy` itself.
    pub qsafe: QsafeTable,
    pub converged: bool,
    pub iterations: usize,
    /// The support sequence revisited an earlier support.
    pub cycled: bool,
}

/// Alternate exact evaluation and re-masking of `base` until the masked
/// policy's support stops changing, so that the returned pair satisfies
/// `masked = mask(base, Q_safe^masked)`.
pub fn fixed_point_masked(
    mdp: &TabularMdp,
    base: &TabularPolicy,
    gamma_safe: f64,
    eps: f64,
    max_iters: usize,
) -> Result<FixedPoint> {
    let mut current = base.clone();
    let mut seen = vec![current.support()];
    let mut last = None;
    for it in 1..=max_iters {
        let q = exact_qsafe(mdp, &current, gamma_safe, DEFAULT_TOL)?;
        let masked = mask_on_mdp(mdp, base, &q, eps);
        let support = masked.policy.support();
        if support == *seen.last().expect("seeded with base support") {
            return Ok(FixedPoint {
                masked,
                qsafe: q,
                converged: true,
                iterations: it,
                cycled: false,
            });
        }
        let cycled = seen.contains(&support);
        current = masked.policy.clone();
        seen.push(support);
        last = Some((masked, q));
        if cycled {
            let (masked, qsafe) = last.expect("set above");
            return Ok(FixedPoint {
                masked,
                qsafe,
                converged: false,
                iterations: it,
                cycled: true,
            });
        }
    }
    let (masked, qsafe) = match last {
        Some(pair) => pair,
        None => {
            let q = exact_qsafe(mdp, base, gamma_safe, DEFAULT_TOL)?;
            (mask_on_mdp(mdp, base, &q, eps), q)
        }
    };
    Ok(FixedPoint {
        masked,
        qsafe,
        converged: false,
        iterations: max_iters,
        cycled: false,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremReport {
    pub assumptions: AssumptionReport,
    pub assumptions_pass: bool,
    pub converged: bool,
    pub iterations: usize,
    /// Reachable non-terminal states where the mask removed every action.
    pub reachable_flags: Vec<usize>,
    /// Whether the preconditions for the bound held, so it was asserted.
    pub bound_checked: bool,
    /// `value < eps`.
    pub bound_holds: bool,
    pub value: f64,
    pub margin: f64,
}

impl TheoremReport {
    /// The bound was asserted and failed.
    pub fn is_violation(&self) -> bool {
        self.bound_checked && !self.bound_holds
    }
}

pub const FIXED_POINT_MAX_ITERS: usize = 100;

/// Check the masked-policy failure bound on one task.
///
/// The bound `E[sum_t gamma^t I(s_t)] < eps` is asserted only when the
/// assumptions hold, the self-consistent mask was found, and no reachable
/// safe state had an empty mask.
pub fn verify_theorem(mdp: &TabularMdp, base: &TabularPolicy, gamma_safe: f64, eps: f64) -> Result<TheoremReport> {
    let assumptions = check_assumptions(mdp, eps);
    let fp = fixed_point_masked(mdp, base, gamma_safe, eps, FIXED_POINT_MAX_ITERS)?;
    let reach = reachable_states(mdp, &fp.masked.policy);
    let reachable_flags: Vec<usize> = fp
        .masked
        .flagged
        .iter()
        .copied()
        .filter(|&s| reach[s] && !mdp.is_terminal(s))
        .collect();
    let value = exact_failure_value(mdp, &fp.masked.policy, gamma_safe)?;
    let assumptions_pass = assumptions.passed();
    Ok(TheoremReport {
        assumptions_pass,
        assumptions,
        converged: fp.converged,
        iterations: fp.iterations,
        bound_checked: assumptions_pass && fp.converged && reachable_flags.is_empty(),
        reachable_flags,
        bound_holds: value < eps,
        value,
        margin: eps - value,
    })
}
