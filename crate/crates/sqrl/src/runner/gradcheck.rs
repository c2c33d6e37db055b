use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::mdp::RngStream;
use crate::nn::{grad_check, GradCheckReport, OutputActivation};
use crate::sac::{obs_action_input, CriticLoss, PolicyLoss, SacConfig, SafetyTerm, Sac};
use crate::safety::SafetyCritic;

#[derive(Clone, Debug, Serialize)]
pub struct NetworkCheck {
    pub network: &'static str,
    pub instance: usize,
    pub report: GradCheckReport,
}

/// Instances closer than this to a non-differentiable point (a ReLU kink
/// or a tie in the twin-critic minimum) are redrawn. Central differences
/// straddling such a point measure an average of two one-sided slopes, not
/// the gradient.
pub const KINK_MARGIN: f64 = 1e-4;

struct Instance {
    sac: Sac,
    safety: SafetyCritic,
    obs: Array2<f64>,
    x: Array2<f64>,
    noise: Array2<f64>,
}

impl Instance {
    fn draw(hidden: &[usize], batch: usize, rng: &mut RngStream) -> Self {
        let cfg = SacConfig {
            hidden: hidden.to_vec(),
            batch_size: batch,
            ..Default::default()
        };
        let sac = Sac::new(2, 2, cfg, rng).expect("valid config");
        let safety = SafetyCritic::new(4, hidden, 0.65, 1e-3, 0.005, rng).expect("valid gamma");
        debug_assert_eq!(safety.net.output_activation(), OutputActivation::Sigmoid);
        let obs = Array2::from_shape_fn((batch, 2), |_| rng.uniform_range(-1.0, 1.0));
        let actions = Array2::from_shape_fn((batch, 2), |_| rng.uniform_range(-0.99, 0.99));
        let x = obs_action_input(obs.view(), actions.view());
        let noise = sac.policy.draw_noise(batch, rng);
        Instance { sac, safety, obs, x, noise }
    }

    /// Distance from the nearest kink of any loss in the suite.
    fn margin(&self) -> f64 {
        let critics = [&self.sac.critics.q1, &self.sac.critics.q2, &self.safety.net];
        let sample = self.sac.policy.sample_batch(self.obs.view(), self.noise.view()).expect("shapes");
        let xp = obs_action_input(self.obs.view(), sample.actions.view());
        let mut m = self.sac.policy.net.relu_margin(self.obs.view()).expect("shapes");
        for net in critics {
            m = m.min(net.relu_margin(self.x.view()).expect("shapes"));
            m = m.min(net.relu_margin(xp.view()).expect("shapes"));
        }
        let q1 = self.sac.critics.q1.forward_batch(xp.view()).expect("shapes");
        let q2 = self.sac.critics.q2.forward_batch(xp.view()).expect("shapes");
        q1.iter().zip(&q2).fold(m, |m, (a, b)| m.min((a - b).abs()))
    }
}

/// Finite-difference checks of the policy objective (with a safety term),
/// both critic losses and the safety-critic loss on `instances` random
/// networks and minibatches, each at least [`KINK_MARGIN`] from a kink.
pub fn gradient_suite(instances: usize, hidden: &[usize], batch: usize, tolerance: f64, seed: u64) -> Vec<NetworkCheck> {
    let root = RngStream::new(seed);
    let mut out = Vec::with_capacity(4 * instances);
    for i in 0..instances {
        let mut rng = root.fork_indexed("gradcheck", i as u64);
        let Instance { sac, safety, obs, x, noise } = loop {
            let inst = Instance::draw(hidden, batch, &mut rng);
            if inst.margin() >= KINK_MARGIN {
                break inst;
            }
        };

        let policy_loss = PolicyLoss {
            critics: &sac.critics,
            safety: Some(SafetyTerm {
                critic: &safety.net,
                weight: rng.uniform_range(0.1, 2.0),
            }),
            alpha: rng.uniform_range(0.05, 1.0),
            action_scale: 1.0,
            obs,
            noise,
        };
        out.push(NetworkCheck {
            network: "policy",
            instance: i,
            report: grad_check(&sac.policy.net, &policy_loss, tolerance),
        });
        for (name, net) in [("q1", &sac.critics.q1), ("q2", &sac.critics.q2)] {
            let loss = CriticLoss {
                inputs: x.clone(),
                targets: Array1::from_shape_fn(batch, |_| rng.uniform_range(-5.0, 5.0)),
            };
            out.push(NetworkCheck {
                network: name,
                instance: i,
                report: grad_check(net, &loss, tolerance),
            });
        }
        let loss = CriticLoss {
            inputs: x,
            targets: Array1::from_shape_fn(batch, |_| rng.uniform()),
        };
        out.push(NetworkCheck {
            network: "safety",
            instance: i,
            report: grad_check(&safety.net, &loss, tolerance),
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suite_passes() {
        let checks = gradient_suite(2, &[6, 6], 4, 1e-4, 11);
        assert_eq!(checks.len(), 8);
        for c in &checks {
            assert!(c.report.passed, "{} #{}: {:?}", c.network, c.instance, c.report);
        }
    }
}
