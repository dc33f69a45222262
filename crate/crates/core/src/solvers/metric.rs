use super::PrimalDualState;
use crate::error::{Error, Result};
use crate::linear::LinearMap;
use crate::schedule::StepSchedule;

/// `‖z‖_{P_k}` for `P_k = [[I/τ, −D*], [−D, I/σ]]`, which is positive definite
/// when `τσ‖D‖² < 1`.
pub fn p_metric_norm(d: &dyn LinearMap, s: &StepSchedule, k: usize, z: &PrimalDualState) -> Result<f64> {
    let tau = s.tau(k);
    let sigma = s.dual(k);
    let nd = d.norm_bound();
    if !(tau > 0.0 && sigma > 0.0 && tau * sigma * nd * nd < 1.0) {
        return Err(Error::invalid(format!(
            "P_k is not positive definite: tau*sigma*|D|^2 = {}",
            tau * sigma * nd * nd
        )));
    }
    if z.x.len() != d.input_dim() || z.y.len() != d.output_dim() {
        return Err(Error::dimension("metric iterate", d.input_dim() + d.output_dim(), z.x.len() + z.y.len()));
    }
    let dx = d.apply(z.x.view());
    let q = z.x.dot(&z.x) / tau - 2.0 * dx.dot(&z.y) + z.y.dot(&z.y) / sigma;
    Ok(q.max(0.0).sqrt())
}
