use ndarray::{Array1, Array2};
use proptest::prelude::*;
use sqrl::mdp::RngStream;
use sqrl::nn::{grad_check, Adam, Mlp, OutputActivation};
use sqrl::sac::{squared_error, CriticLoss};

fn activation() -> impl Strategy<Value = OutputActivation> {
    prop_oneof![
        Just(OutputActivation::Identity),
        Just(OutputActivation::Tanh),
        Just(OutputActivation::Sigmoid)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn backprop_matches_central_differences(
        input in 1usize..5,
        hidden in prop::collection::vec(1usize..8, 0..=3),
        act in activation(),
        batch in 1usize..6,
        seed in any::<u64>(),
    ) {
        let mut rng = RngStream::new(seed);
        let mut sizes = vec![input];
        sizes.extend(&hidden);
        sizes.push(1);
        let net = Mlp::new(&sizes, act, &mut rng);
        let loss = CriticLoss {
            inputs: Array2::from_shape_fn((batch, input), |_| rng.uniform_range(-2.0, 2.0)),
            targets: Array1::from_shape_fn(batch, |_| rng.uniform_range(-1.0, 1.0)),
        };
        let report = grad_check(&net, &loss, 1e-4);
        prop_assert!(report.passed, "{sizes:?} {act:?}: {report:?}");
    }
}

#[test]
fn shared_forward_is_deterministic_across_threads() {
    let net = Mlp::new(&[3, 16, 16, 2], OutputActivation::Tanh, &mut RngStream::new(5));
    let x = Array2::from_shape_fn((32, 3), |(i, j)| (i as f64 * 0.37 + j as f64).sin());
    let reference = net.forward_batch(x.view()).unwrap();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..4)
            .map(|_| scope.spawn(|| (0..50).map(|_| net.forward_batch(x.view()).unwrap()).collect::<Vec<_>>()))
            .collect();
        for h in handles {
            for out in h.join().unwrap() {
                assert_eq!(out, reference);
            }
        }
    });
}

#[test]
fn long_adam_run_stays_finite() {
    let mut rng = RngStream::new(6);
    let mut net = Mlp::new(&[2, 8, 1], OutputActivation::Sigmoid, &mut rng);
    let x = Array2::from_shape_fn((8, 2), |_| rng.uniform_range(-1.0, 1.0));
    let y = Array1::from_shape_fn(8, |i| (i % 2) as f64);
    let mut opt = Adam::new(net.n_params(), 1e-2);
    for _ in 0..100_000 {
        let (_, g) = squared_error(&net, x.view(), &y).unwrap();
        opt.step(net.params_mut(), &g).unwrap();
    }
    assert!(net.all_finite());
    assert_eq!(opt.steps(), 100_000);
}
