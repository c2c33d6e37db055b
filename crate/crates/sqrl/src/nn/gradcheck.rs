use crate::nn::Mlp;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Denominator floor for the relative error, so gradients that are
/// numerically zero do not amplify roundoff.
pub const REL_ERROR_FLOOR: f64 = 1e-5;

/// A scalar loss of one network's parameters with an analytic gradient.
pub trait DifferentiableLoss {
    fn loss(&self, net: &Mlp) -> f64;
    fn gradient(&self, net: &Mlp) -> Vec<f64>;
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct GradCheckReport {
    pub passed: bool,
    pub worst_rel_error: f64,
    pub worst_index: usize,
    pub n_checked: usize,
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_ERROR_FLOOR)
}

/// Compare the analytic gradient against central differences on every
/// parameter. Passes iff the worst relative error is strictly below
/// `tolerance`.
pub fn grad_check<L: DifferentiableLoss + ?Sized>(net: &Mlp, loss: &L, tolerance: f64) -> GradCheckReport {
    let analytic = loss.gradient(net);
    assert_eq!(analytic.len(), net.n_params(), "gradient length must match parameter count");
    let mut probe = net.clone();
    let mut worst = (0.0f64, 0usize);
    for i in 0..net.n_params() {
        let p0 = net.params()[i];
        probe.params_mut()[i] = p0 + FD_STEP;
        let up = loss.loss(&probe);
        probe.params_mut()[i] = p0 - FD_STEP;
        let down = loss.loss(&probe);
        probe.params_mut()[i] = p0;
        let numeric = (up - down) / (2.0 * FD_STEP);
        let err = relative_error(analytic[i], numeric);
        if err > worst.0 || err.is_nan() {
            worst = (if err.is_nan() { f64::INFINITY } else { err }, i);
        }
    }
    GradCheckReport {
        passed: worst.0 < tolerance,
        worst_rel_error: worst.0,
        worst_index: worst.1,
        n_checked: net.n_params(),
    }
}
