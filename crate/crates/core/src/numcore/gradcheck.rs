//! Numerical gradient verification by central finite differences.

use crate::{Error, Result};

/// Outcome of a gradient check.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    /// Largest relative error over all coordinates.
    pub max_rel_err: f64,
    /// Coordinate where the largest error occurred.
    pub worst_coordinate: usize,
    pub pass: bool,
}

/// Compares `analytic` to the central difference `(f(p+h) - f(p-h)) / (2h)`
/// per coordinate.
///
/// The relative error is taken against the numeric reference, with the
/// denominator floored at 1e-8: `|a - n| / max(|n|, 1e-8)`. Passes iff the
/// maximum relative error is at most `tol`.
pub fn grad_check<F>(
    mut f: F,
    params: &[f64],
    analytic: &[f64],
    h: f64,
    tol: f64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> f64,
{
    if params.len() != analytic.len() {
        return Err(Error::ShapeMismatch(format!(
            "params length {} != analytic gradient length {}",
            params.len(),
            analytic.len()
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidConfig(format!("step size h = {h} invalid")));
    }

    let mut work = params.to_vec();
    let mut max_rel_err = 0.0;
    let mut worst_coordinate = 0;
    for i in 0..params.len() {
        work[i] = params[i] + h;
        let f_plus = f(&work);
        work[i] = params[i] - h;
        let f_minus = f(&work);
        work[i] = params[i];
        if !f_plus.is_finite() || !f_minus.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite evaluation while perturbing coordinate {i}"
            )));
        }
        let numeric = (f_plus - f_minus) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / numeric.abs().max(1e-8);
        if rel > max_rel_err {
            max_rel_err = rel;
            worst_coordinate = i;
        }
    }
    Ok(GradCheckReport {
        max_rel_err,
        worst_coordinate,
        pass: max_rel_err <= tol,
    })
}
