use proptest::prelude::*;
use sqrl::mdp::RngStream;
use sqrl::nn::{Mlp, OutputActivation};
use sqrl::sac::SquashedGaussianPolicy;
use sqrl::safety::{is_safe, select_masked, select_riskiest_safe, ExplorationMode, FnRisk, MaskedSamplingPolicy, SafetyCritic};

fn base(seed: u64) -> SquashedGaussianPolicy {
    SquashedGaussianPolicy::new(2, 2, &[8], 1.0, &mut RngStream::new(seed))
}

/// Two-sample Kolmogorov-Smirnov statistic.
fn ks_statistic(mut a: Vec<f64>, mut b: Vec<f64>) -> f64 {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / a.len() as f64 - j as f64 / b.len() as f64).abs());
    }
    d
}

#[test]
fn inactive_mask_leaves_the_base_distribution() {
    let pi = base(1);
    let risk = FnRisk(|_: &[f64], _: &[f64]| 0.5);
    let masked = MaskedSamplingPolicy {
        base: &pi,
        risk: &risk,
        eps_safe: 1.0,
        n_cand: 10,
        mode: ExplorationMode::SafestAmong,
    };
    let obs = [0.3, -0.2];
    let n = 10_000;
    let mut r1 = RngStream::new(10);
    let mut r2 = RngStream::new(20);
    for dim in 0..2 {
        let from_mask: Vec<f64> = (0..n)
            .map(|_| {
                let s = masked.sample(&obs, &mut r1).unwrap();
                assert!(!s.fallback_used && s.n_rejected == 0);
                s.action[dim]
            })
            .collect();
        let from_base: Vec<f64> = (0..n).map(|_| pi.sample_action(&obs, &mut r2).unwrap().0[dim]).collect();
        // critical value of the two-sample test at the 1% level
        let crit = 1.628 * ((2 * n) as f64 / (n * n) as f64).sqrt();
        let d = ks_statistic(from_mask, from_base);
        assert!(d < crit, "dimension {dim}: D = {d} >= {crit}");
    }
}

#[test]
fn saturated_critic_always_falls_back_to_the_argmin() {
    let pi = base(2);
    let mut rng = RngStream::new(3);
    let mut net = Mlp::new(&[4, 6, 1], OutputActivation::Sigmoid, &mut rng);
    let last = net.n_layers() - 1;
    net.bias_mut(last)[0] = 60.0;
    let critic = SafetyCritic::from_nets(net.clone(), net, 0.65, 1e-3, 0.005);
    let masked = MaskedSamplingPolicy {
        base: &pi,
        risk: &critic,
        eps_safe: 0.1,
        n_cand: 5,
        mode: ExplorationMode::SafestAmong,
    };
    for _ in 0..200 {
        let s = masked.sample(&[0.1, 0.9], &mut rng).unwrap();
        assert!(s.fallback_used);
        assert_eq!(s.n_rejected, 5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn masked_choice_is_safe_or_the_argmin(risks in prop::collection::vec(0.0f64..1.0, 1..12), eps in 0.0f64..1.0, seed in any::<u64>()) {
        let (i, rejected, fallback) = select_masked(&risks, eps, &mut RngStream::new(seed));
        let n_safe = risks.iter().filter(|&&q| is_safe(q, eps)).count();
        prop_assert_eq!(rejected, risks.len() - n_safe);
        prop_assert_eq!(fallback, n_safe == 0);
        if fallback {
            let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(risks[i], min);
            prop_assert_eq!(i, risks.iter().position(|&q| q == min).unwrap());
        } else {
            prop_assert!(is_safe(risks[i], eps));
        }
    }

    #[test]
    fn riskiest_safe_is_the_largest_safe_risk(risks in prop::collection::vec(0.0f64..1.0, 1..12), eps in 0.0f64..1.0) {
        let (i, _, fallback) = select_riskiest_safe(&risks, eps);
        if !fallback {
            prop_assert!(is_safe(risks[i], eps));
            prop_assert!(risks.iter().all(|&q| !is_safe(q, eps) || q <= risks[i]));
        }
    }

    #[test]
    fn emitted_actions_pass_the_critic(seed in any::<u64>(), eps in 0.02f64..0.9, x in -1.0f64..1.0, y in -1.0f64..1.0) {
        let pi = base(seed);
        let mut rng = RngStream::new(seed ^ 1);
        let critic = SafetyCritic::new(4, &[6], 0.65, 1e-3, 0.005, &mut rng).unwrap();
        for mode in [ExplorationMode::SafestAmong, ExplorationMode::RiskiestSafe] {
            let masked = MaskedSamplingPolicy { base: &pi, risk: &critic, eps_safe: eps, n_cand: 8, mode };
            for _ in 0..20 {
                let s = masked.sample(&[x, y], &mut rng).unwrap();
                let mut input = vec![x, y];
                input.extend_from_slice(&s.action);
                let q = critic.predict(&input).unwrap();
                prop_assert_eq!(Some(q), s.qsafe);
                if !s.fallback_used {
                    prop_assert!(is_safe(q, eps));
                }
            }
        }
    }

    #[test]
    fn higher_threshold_never_rejects_more(seed in any::<u64>(), e1 in 0.01f64..0.99, e2 in 0.01f64..0.99) {
        let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
        let pi = base(seed);
        let critic = SafetyCritic::new(4, &[6], 0.65, 1e-3, 0.005, &mut RngStream::new(seed ^ 2)).unwrap();
        let rejected = |eps: f64| {
            let masked = MaskedSamplingPolicy { base: &pi, risk: &critic, eps_safe: eps, n_cand: 10, mode: ExplorationMode::SafestAmong };
            let mut rng = RngStream::new(seed ^ 3);
            (0..30).map(|_| masked.sample(&[0.2, 0.4], &mut rng).unwrap().n_rejected).sum::<usize>()
        };
        prop_assert!(rejected(hi) <= rejected(lo));
    }
}
