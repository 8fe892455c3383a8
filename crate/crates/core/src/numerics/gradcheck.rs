//! Central finite-difference verification of analytic gradients.

use super::layers::HasParams;
use crate::error::{McgError, Result};

/// Perturbation used by [`finite_diff_check`].
pub const FD_STEP: f64 = 1e-5;

/// Compares analytic gradients against central differences.
///
/// `f(model, true)` must evaluate the loss and accumulate its analytic
/// gradient into every parameter's `grad`; `f(model, false)` evaluates the
/// loss only. Returns the maximum over all parameter entries of
/// `|analytic − numeric| / max(1, |numeric|)`.
pub fn finite_diff_check<M, F>(model: &mut M, mut f: F) -> Result<f64>
where
    M: HasParams,
    F: FnMut(&mut M, bool) -> Result<f64>,
{
    model.zero_grads();
    let base = f(model, true)?;
    if !base.is_finite() {
        return Err(McgError::Numeric(format!("loss is not finite: {base}")));
    }
    let analytic: Vec<Vec<f64>> = model
        .params()
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();

    let mut worst: f64 = 0.0;
    for (pi, grads) in analytic.iter().enumerate() {
        for (ei, &g) in grads.iter().enumerate() {
            let original = model.params()[pi].value.data()[ei];
            model.params_mut()[pi].value.data_mut()[ei] = original + FD_STEP;
            let plus = f(model, false)?;
            model.params_mut()[pi].value.data_mut()[ei] = original - FD_STEP;
            let minus = f(model, false)?;
            model.params_mut()[pi].value.data_mut()[ei] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(McgError::Numeric("perturbed loss is not finite".into()));
            }
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            worst = worst.max((g - numeric).abs() / numeric.abs().max(1.0));
        }
    }
    Ok(worst)
}
