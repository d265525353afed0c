use serde::{Deserialize, Serialize};

use super::Objective;
use crate::constants::GRAD_CHECK_FLOOR;
use crate::{Error, Result};

/// Central differences `(f(x + h e_i) - f(x - h e_i)) / 2h` per coordinate.
pub fn finite_diff_gradient(f: &dyn Fn(&[f64]) -> f64, at: &[f64], h: f64) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("step h must be positive, got {h}")));
    }
    let mut point = at.to_vec();
    let mut grad = Vec::with_capacity(at.len());
    for i in 0..at.len() {
        point[i] = at[i] + h;
        let up = f(&point);
        point[i] = at[i] - h;
        let down = f(&point);
        point[i] = at[i];
        if !(up.is_finite() && down.is_finite()) {
            return Err(Error::Divergence { iteration: i });
        }
        grad.push((up - down) / (2.0 * h));
    }
    Ok(grad)
}

/// `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
    (analytic - numeric).abs() / scale
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub passed: bool,
}

/// Compares the analytic gradient of `objective` at `at` with central differences.
pub fn grad_check(objective: &dyn Objective, at: &[f64], h: f64, threshold: f64) -> Result<GradCheckReport> {
    let mut analytic = vec![0.0; at.len()];
    objective.value_and_gradient(at, &mut analytic);
    let numeric = finite_diff_gradient(&|t| objective.value(t), at, h)?;
    let mut worst = (0.0, 0);
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let err = relative_error(*a, *n);
        if !(err <= worst.0) {
            worst = (err, i);
        }
    }
    Ok(GradCheckReport {
        max_rel_error: worst.0,
        worst_index: worst.1,
        passed: worst.0 <= threshold,
    })
}
