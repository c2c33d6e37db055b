use serde::{Deserialize, Serialize};

use crate::error::{Result, SqrlError};

/// Bias-corrected Adam over a flat parameter slice.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(n_params: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// Apply one update. A non-finite gradient aborts before any parameter
    /// or moment is touched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(SqrlError::DimensionMismatch {
                expected: self.m.len(),
                got: if params.len() != self.m.len() { params.len() } else { grads.len() },
            });
        }
        if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
            return Err(SqrlError::NonFiniteGradient { index });
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_is_about_minus_lr() {
        let mut opt = Adam::new(1, 0.001);
        let mut p = [0.0];
        opt.step(&mut p, &[1.0]).unwrap();
        // m_hat = 1, v_hat = 1 -> -lr / (1 + 1e-8)
        assert!((p[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-15);
    }

    #[test]
    fn two_steps_match_hand_iteration() {
        let (lr, g) = (0.01, 0.5);
        let mut opt = Adam::new(1, lr);
        let mut p = [1.0];
        opt.step(&mut p, &[g]).unwrap();
        opt.step(&mut p, &[g]).unwrap();
        let mut expected = 1.0;
        let (mut m, mut v) = (0.0f64, 0.0f64);
        for t in 1..=2 {
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            expected -= lr * mh / (vh.sqrt() + 1e-8);
        }
        assert!((p[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut opt = Adam::new(3, 0.1);
        let mut p = [1.0, -2.0, 3.0];
        for _ in 0..100 {
            opt.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, [1.0, -2.0, 3.0]);
        assert_eq!(opt.steps(), 100);
    }

    #[test]
    fn nan_gradient_fails_fast() {
        let mut opt = Adam::new(2, 0.1);
        let mut p = [1.0, 1.0];
        let err = opt.step(&mut p, &[0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, SqrlError::NonFiniteGradient { index: 1 }));
        assert_eq!(p, [1.0, 1.0]);
        assert_eq!(opt.steps(), 0);
    }
}
