//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use sqrl::envs::{build_grid_mdp, DrunkSpiderGrid, GridConfig, TabularMdp};
use sqrl::mdp::{rollout, ReplayBuffer, RngStream, Transition};
use sqrl::oracle::{exact_qsafe, TabularPolicy, DEFAULT_TOL};
use sqrl::safety::{jsafe_update, SafetyCritic};

/// Nonzero successors of every `(s, a)`, indexed `s * n_actions + a`.
pub struct Sparse {
    pub n_actions: usize,
    pub succ: Vec<Vec<(usize, f64)>>,
}

impl Sparse {
    pub fn new(mdp: &TabularMdp) -> Self {
        let (ns, na) = (mdp.n_states(), mdp.n_actions());
        let mut succ = Vec::with_capacity(ns * na);
        for s in 0..ns {
            for a in 0..na {
                succ.push((0..ns).map(|n| (n, mdp.prob(s, a, n))).filter(|&(_, p)| p > 0.0).collect());
            }
        }
        Self { n_actions: na, succ }
    }

    pub fn row(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.succ[s * self.n_actions + a]
    }
}

fn draw(pairs: &[(usize, f64)], rng: &mut RngStream) -> usize {
    let u = rng.uniform();
    let mut acc = 0.0;
    for &(i, p) in pairs {
        acc += p;
        if u < acc {
            return i;
        }
    }
    pairs.last().expect("non-empty row").0
}

fn draw_action(policy: &TabularPolicy, s: usize, rng: &mut RngStream) -> usize {
    let row = policy.row(s);
    let u = rng.uniform();
    let mut acc = 0.0;
    for (a, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return a;
        }
    }
    row.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Discounted failure probability of `(s, a)` truncated after `horizon`
/// steps, computed by pushing the exact distribution over states forward.
/// Mass entering an unsafe state at step `t` contributes `gamma^t`; mass in
/// any other absorbing or goal state is dropped.
pub fn forward_qsafe(mdp: &TabularMdp, sp: &Sparse, policy: &TabularPolicy, gamma: f64, s: usize, a: usize, horizon: usize) -> f64 {
    if mdp.is_unsafe(s) {
        return 1.0;
    }
    if mdp.is_terminal(s) {
        return 0.0;
    }
    let ns = mdp.n_states();
    let mut dist = vec![0.0; ns];
    for &(n, p) in sp.row(s, a) {
        dist[n] += p;
    }
    let mut value = 0.0;
    for t in 1..=horizon {
        let mut next = vec![0.0; ns];
        for (st, &m) in dist.iter().enumerate() {
            if m == 0.0 {
                continue;
            }
            if mdp.is_unsafe(st) {
                value += gamma.powi(t as i32) * m;
                continue;
            }
            if mdp.is_terminal(st) || is_absorbing_safe(sp, st) {
                continue;
            }
            for (act, &pa) in policy.row(st).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for &(n, p) in sp.row(st, act) {
                    next[n] += m * pa * p;
                }
            }
        }
        dist = next;
    }
    value
}

fn is_absorbing_safe(sp: &Sparse, s: usize) -> bool {
    (0..sp.n_actions).all(|a| matches!(sp.row(s, a), [(n, _)] if *n == s))
}

/// Explicit depth-first enumeration of every trajectory of length at most
/// `horizon`, summing `prob * gamma^t` over paths that first hit an unsafe
/// state at step `t`.
pub fn enumerate_qsafe(mdp: &TabularMdp, policy: &TabularPolicy, gamma: f64, s: usize, a: usize, horizon: usize) -> f64 {
    if mdp.is_unsafe(s) {
        return 1.0;
    }
    if mdp.is_terminal(s) {
        return 0.0;
    }
    fn walk(mdp: &TabularMdp, policy: &TabularPolicy, gamma: f64, s: usize, a: usize, t: usize, horizon: usize, prob: f64) -> f64 {
        let mut total = 0.0;
        for n in 0..mdp.n_states() {
            let p = prob * mdp.prob(s, a, n);
            if p == 0.0 {
                continue;
            }
            if mdp.is_unsafe(n) {
                total += p * gamma.powi(t as i32);
            } else if !mdp.is_terminal(n) && t < horizon {
                for (act, &pa) in policy.row(n).iter().enumerate() {
                    if pa > 0.0 {
                        total += walk(mdp, policy, gamma, n, act, t + 1, horizon, p * pa);
                    }
                }
            }
        }
        total
    }
    walk(mdp, policy, gamma, s, a, 1, horizon, 1.0)
}

/// Monte Carlo estimate of `E[sum_t gamma^t I(s_t)]` from the initial
/// distribution. Returns `(mean, standard error)`. Episodes run until an
/// absorbing state or until `gamma^t` drops below `1e-13`.
pub fn mc_failure_value(mdp: &TabularMdp, sp: &Sparse, policy: &TabularPolicy, gamma: f64, n: usize, rng: &mut RngStream) -> (f64, f64) {
    let init: Vec<(usize, f64)> = mdp.initial().iter().copied().enumerate().filter(|&(_, p)| p > 0.0).collect();
    let cutoff = (1e-13f64.ln() / gamma.ln()).ceil() as usize;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let mut s = draw(&init, rng);
        let mut g = 0.0;
        let mut disc = 1.0;
        for _ in 0..=cutoff {
            if mdp.is_unsafe(s) {
                g = disc;
                break;
            }
            if mdp.is_terminal(s) || is_absorbing_safe(sp, s) {
                break;
            }
            let a = draw_action(policy, s, rng);
            s = draw(sp.row(s, a), rng);
            disc *= gamma;
        }
        sum += g;
        sum_sq += g * g;
    }
    let mean = sum / n as f64;
    let var = (sum_sq / n as f64 - mean * mean).max(0.0);
    (mean, (var / n as f64).sqrt())
}

/// A random tabular task with `ns` states and `na` actions: the last state is
/// unsafe, state `ns - 2` is a goal, and every row is a random distribution
/// over at most three successors.
pub fn random_small_mdp(ns: usize, na: usize, rng: &mut RngStream) -> TabularMdp {
    assert!(ns >= 3);
    let (bad, goal) = (ns - 1, ns - 2);
    let mut p = vec![0.0; ns * na * ns];
    for s in 0..ns {
        for a in 0..na {
            let row = &mut p[(s * na + a) * ns..(s * na + a + 1) * ns];
            if s == bad || s == goal {
                row[s] = 1.0;
                continue;
            }
            for _ in 0..3 {
                row[rng.below(ns)] += rng.uniform() + 0.05;
            }
            let z: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= z);
        }
    }
    let mut mu = vec![0.0; ns];
    mu[0] = 1.0;
    let unsafe_states = (0..ns).map(|s| s == bad).collect();
    let goals = (0..ns).map(|s| s == goal).collect();
    TabularMdp::new(ns, na, p, vec![0.0; ns * na], mu, unsafe_states, goals).expect("valid random task")
}

/// Behavior policy for the grid experiments: a rightward drift with every
/// action possible. Action order follows `GridAction::ALL`.
pub fn drifting_policy(n_states: usize) -> TabularPolicy {
    let row = [0.15, 0.15, 0.1, 0.4, 0.2];
    TabularPolicy::new(n_states, 5, row.repeat(n_states)).expect("rows sum to one")
}

pub fn one_hot(n_states: usize, n_actions: usize, s: usize, a: usize) -> Vec<f64> {
    let mut x = vec![0.0; n_states + n_actions];
    x[s] = 1.0;
    x[n_states + a] = 1.0;
    x
}

pub struct GridFidelity {
    pub mae: f64,
    pub visited_pairs: usize,
    pub updates: usize,
}

/// Train a one-hot safety critic on data from the drifting behavior policy
/// on the default grid and compare with the exact table on visited pairs.
pub fn grid_critic_fidelity(updates: usize, seed: u64) -> GridFidelity {
    let grid: DrunkSpiderGrid = build_grid_mdp(&GridConfig::default()).expect("default grid builds");
    let mdp = &grid.mdp;
    let (ns, na) = (mdp.n_states(), mdp.n_actions());
    let behavior = drifting_policy(ns);
    let gamma_safe = 0.65;
    let exact = exact_qsafe(mdp, &behavior, gamma_safe, DEFAULT_TOL).expect("oracle converges");

    let root = RngStream::new(seed);
    let mut data_rng = root.fork("data");
    let mut buffer: ReplayBuffer<Transition<usize, usize>> = ReplayBuffer::new(100_000);
    let mut visited = vec![false; ns * na];
    while buffer.len() < 20_000 {
        let mut act = |s: &usize, r: &mut RngStream| draw_action(&behavior, *s, r);
        let traj = rollout(&mut act, mdp, &mut data_rng).expect("valid actions");
        for t in traj.transitions {
            visited[t.state * na + t.action] = true;
            buffer.push(t);
        }
    }

    let mut rng = root.fork("learn");
    let mut critic = SafetyCritic::new(ns + na, &[64], gamma_safe, 1e-3, 0.01, &mut rng).expect("valid gamma");
    for _ in 0..updates {
        let batch = buffer.sample(64, &mut rng).expect("non-empty buffer");
        jsafe_update(
            &mut critic,
            &batch,
            |s, a| one_hot(ns, na, *s, *a),
            |s, r| draw_action(&behavior, *s, r),
            &mut rng,
        )
        .expect("finite update");
    }

    let (mut err, mut n) = (0.0, 0);
    for s in 0..ns {
        for a in 0..na {
            if visited[s * na + a] {
                let q = critic.predict(&one_hot(ns, na, s, a)).expect("matching input");
                err += (q - exact.get(s, a)).abs();
                n += 1;
            }
        }
    }
    GridFidelity {
        mae: err / n as f64,
        visited_pairs: n,
        updates,
    }
}
