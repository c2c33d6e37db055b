use crate::envs::tabular::TabularMdp;
use crate::error::{Result, SqrlError};
use crate::mdp::RngStream;

/// Action index that never leaves the safe states.
pub const RETREAT_ACTION: usize = 0;

/// Upper bound on total unsafe mass per `(s, a)` row.
const MAX_UNSAFE_MASS: f64 = 0.8;

/// Random finite MDP built so that the minimum-unsafe-mass and
/// safe-action assumptions hold by construction.
///
/// The last `n_unsafe` states are unsafe and absorbing. The last safe state
/// is an absorbing backbone. Action [`RETREAT_ACTION`] at every safe state
/// moves only among safe states with positive mass on the backbone. Every
/// other transition into an unsafe state carries mass strictly above
/// `eps_min` or exactly zero.
#[derive(Clone, Debug)]
pub struct RandomAssumptionMdp {
    pub mdp: TabularMdp,
    pub unsafe_states: Vec<usize>,
    pub backbone: Vec<usize>,
    pub eps_min: f64,
}

pub fn generate_assumption_mdp(
    n_states: usize,
    n_actions: usize,
    eps_min: f64,
    seed: u64,
) -> Result<RandomAssumptionMdp> {
    if n_states < 3 {
        return Err(SqrlError::Infeasible(format!(
            "need at least 3 states (1 unsafe, 2 safe), got {n_states}"
        )));
    }
    if n_actions == 0 {
        return Err(SqrlError::Infeasible("need at least one action".into()));
    }
    if !(0.0..MAX_UNSAFE_MASS).contains(&eps_min) {
        return Err(SqrlError::Infeasible(format!(
            "eps_min {eps_min} must lie in [0, {MAX_UNSAFE_MASS})"
        )));
    }
    let mut rng = RngStream::new(seed);
    let n_unsafe = (n_states / 5).clamp(1, n_states - 2);
    let n_safe = n_states - n_unsafe;
    let backbone = n_safe - 1;
    let unsafe_states: Vec<usize> = (n_safe..n_states).collect();
    // slightly above eps_min so rounding never lands on the boundary
    let floor = eps_min * 1.05 + 1e-6;

    let mut p = vec![0.0; n_states * n_actions * n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            let row = &mut p[(s * n_actions + a) * n_states..(s * n_actions + a + 1) * n_states];
            if s >= n_safe || s == backbone {
                row[s] = 1.0;
                continue;
            }
            // Unsafe part.
            let mut unsafe_total = 0.0;
            if a != RETREAT_ACTION {
                let budget = rng.uniform() * MAX_UNSAFE_MASS;
                let mut chosen: Vec<usize> = unsafe_states.iter().copied().filter(|_| rng.uniform() < 0.5).collect();
                while !chosen.is_empty() && chosen.len() as f64 * floor > budget {
                    chosen.pop();
                }
                if !chosen.is_empty() {
                    let spare = budget - chosen.len() as f64 * floor;
                    let w: Vec<f64> = chosen.iter().map(|_| rng.uniform() + 1e-3).collect();
                    let wsum: f64 = w.iter().sum();
                    for (&u, wi) in chosen.iter().zip(&w) {
                        row[u] = floor + spare * wi / wsum;
                        unsafe_total += row[u];
                    }
                }
            }
            // Safe part: random sparse weights, backbone always present for
            // the retreat action so it is reachable from everywhere.
            let mut w: Vec<f64> = (0..n_safe)
                .map(|_| if rng.uniform() < 0.6 { rng.uniform() + 1e-3 } else { 0.0 })
                .collect();
            if a == RETREAT_ACTION {
                w[backbone] += 0.3;
            }
            if w.iter().all(|&x| x == 0.0) {
                w[rng.below(n_safe)] = 1.0;
            }
            let wsum: f64 = w.iter().sum();
            for (t, wi) in w.iter().enumerate() {
                row[t] = (1.0 - unsafe_total) * wi / wsum;
            }
        }
    }

    let mut mu: Vec<f64> = (0..n_states)
        .map(|s| if s < n_safe { rng.uniform() + 1e-3 } else { 0.0 })
        .collect();
    let total: f64 = mu.iter().sum();
    mu.iter_mut().for_each(|m| *m /= total);

    let rewards: Vec<f64> = (0..n_states * n_actions).map(|_| rng.uniform()).collect();
    let unsafe_flags: Vec<bool> = (0..n_states).map(|s| s >= n_safe).collect();
    let mdp = TabularMdp::new(n_states, n_actions, p, rewards, mu, unsafe_flags, vec![false; n_states])?;
    Ok(RandomAssumptionMdp {
        mdp,
        unsafe_states,
        backbone: vec![backbone],
        eps_min,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::tabular::check_assumptions;

    #[test]
    fn output_passes_check() {
        for seed in 0..50 {
            let g = generate_assumption_mdp(3 + (seed as usize % 18), 1 + seed as usize % 4, 0.05, seed).unwrap();
            assert!(check_assumptions(&g.mdp, 0.05).passed(), "seed {seed}");
        }
    }

    #[test]
    fn single_action_is_forced_safe() {
        let g = generate_assumption_mdp(3, 1, 0.05, 4).unwrap();
        assert_eq!(g.unsafe_states, vec![2]);
        for s in 0..2 {
            assert_eq!(g.mdp.prob(s, 0, 2), 0.0);
        }
    }

    #[test]
    fn unsafe_masses_zero_or_above_floor() {
        let mut nonzero = 0;
        for seed in 0..100 {
            let g = generate_assumption_mdp(12, 3, 0.05, seed).unwrap();
            for s in 0..g.mdp.n_states() {
                if g.mdp.is_unsafe(s) {
                    continue;
                }
                for a in 0..g.mdp.n_actions() {
                    for &u in &g.unsafe_states {
                        let q = g.mdp.prob(s, a, u);
                        assert!(q == 0.0 || q > 0.05, "seed {seed}: P({u}|{s},{a}) = {q}");
                        nonzero += (q > 0.0) as usize;
                    }
                }
            }
        }
        assert!(nonzero > 100, "generator produced almost no risk");
    }

    #[test]
    fn mu_only_on_safe_states() {
        let g = generate_assumption_mdp(10, 2, 0.1, 1).unwrap();
        for &u in &g.unsafe_states {
            assert_eq!(g.mdp.initial()[u], 0.0);
        }
    }

    #[test]
    fn infeasible_inputs() {
        assert!(generate_assumption_mdp(2, 2, 0.05, 0).is_err());
        assert!(generate_assumption_mdp(5, 0, 0.05, 0).is_err());
        assert!(generate_assumption_mdp(5, 2, 0.9, 0).is_err());
    }
}
