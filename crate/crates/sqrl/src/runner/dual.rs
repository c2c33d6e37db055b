use serde::{Deserialize, Serialize};

/// Lagrange multiplier for the safety constraint, kept non-negative by
/// projection.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub nu: f64,
    pub lr: f64,
}

impl DualState {
    pub fn new(nu: f64, lr: f64) -> Self {
        Self { nu: nu.max(0.0), lr }
    }

    /// Gradient step on `nu * (eps_safe - mean_qsafe)` followed by
    /// projection onto `[0, inf)`. `mean_qsafe` is treated as a constant.
    pub fn update(&mut self, mean_qsafe: f64, eps_safe: f64) -> f64 {
        let grad = eps_safe - mean_qsafe;
        self.nu = (self.nu - self.lr * grad).max(0.0);
        self.nu
    }
}
