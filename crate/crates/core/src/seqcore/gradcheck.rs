use alloc::vec::Vec;

use crate::math;

/// Central-difference step. 1e-5 balances truncation against round-off for
/// objectives of order one at 64-bit precision.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum NumericError {
    #[error("objective returned a non-finite value at parameter {index}")]
    NonFiniteObjective { index: usize },
    #[error("analytic gradient has a non-finite value at parameter {index}")]
    NonFiniteGradient { index: usize },
}

/// Outcome of comparing an analytic gradient against central differences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub n_params: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Compare `analytic` against the central finite difference of `f` at `x0`.
///
/// The relative error denominator is floored at 1e-6 so that parameters with
/// (near-)zero true gradient — dead relu paths, padding taps — are judged on
/// an absolute scale instead of blowing up the ratio.
pub fn gradient_check(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    analytic: &[f64],
    tol: f64,
) -> Result<GradCheckReport, NumericError> {
    assert_eq!(x0.len(), analytic.len());
    let mut x: Vec<f64> = x0.to_vec();
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    for i in 0..x.len() {
        if !analytic[i].is_finite() {
            return Err(NumericError::NonFiniteGradient { index: i });
        }
        let saved = x[i];
        x[i] = saved + FD_STEP;
        let up = f(&x);
        x[i] = saved - FD_STEP;
        let down = f(&x);
        x[i] = saved;
        if !up.is_finite() || !down.is_finite() {
            return Err(NumericError::NonFiniteObjective { index: i });
        }
        let numeric = (up - down) / (2.0 * FD_STEP);
        let abs_err = math::abs(analytic[i] - numeric);
        let denom = math::abs(analytic[i]).max(math::abs(numeric)).max(1e-6);
        max_abs = max_abs.max(abs_err);
        max_rel = max_rel.max(abs_err / denom);
    }
    Ok(GradCheckReport {
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        n_params: x.len(),
        tol,
        passed: max_rel < tol,
    })
}
