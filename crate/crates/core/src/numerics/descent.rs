use serde::{Deserialize, Serialize};

use super::ParamVector;
use crate::constants::{GRAD_TOL, MAX_ITERS, STEP_SIZE};
use crate::{Error, Result};

/// A differentiable scalar objective over a flat parameter vector.
pub trait Objective {
    /// Returns the objective at `theta` and writes its gradient into `grad`.
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64;

    fn value(&self, theta: &[f64]) -> f64 {
        let mut scratch = vec![0.0; theta.len()];
        self.value_and_gradient(theta, &mut scratch)
    }
}

impl<F> Objective for F
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        self(theta, grad)
    }
}

/// Maps a point onto a feasible set in place. Must be idempotent.
pub trait Projector {
    fn project(&self, theta: &mut [f64]);
}

impl<F> Projector for F
where
    F: Fn(&mut [f64]),
{
    fn project(&self, theta: &mut [f64]) {
        self(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DescentOptions {
    pub step_size: f64,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub seed: u64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            step_size: STEP_SIZE,
            max_iters: MAX_ITERS,
            grad_tol: GRAD_TOL,
            seed: 0,
        }
    }
}

impl DescentOptions {
    pub fn with_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_step(mut self, step_size: f64) -> Self {
        self.step_size = step_size;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::Config(format!(
                "step_size must be positive, got {}",
                self.step_size
            )));
        }
        if !(self.grad_tol > 0.0) {
            return Err(Error::Config(format!(
                "grad_tol must be positive, got {}",
                self.grad_tol
            )));
        }
        Ok(())
    }
}

/// Result of a descent run, including the accepted objective values.
#[derive(Debug, Clone)]
pub struct DescentOutcome {
    pub params: ParamVector,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at every accepted iterate, starting with the (projected) init.
    pub history: Vec<f64>,
}

impl DescentOutcome {
    pub fn final_value(&self) -> f64 {
        *self.history.last().expect("history holds at least the initial value")
    }
}

/// Full-batch fixed-step gradient descent.
pub fn gradient_descent(
    objective: &dyn Objective,
    init: &ParamVector,
    opts: &DescentOptions,
) -> Result<ParamVector> {
    minimize(objective, init, None, opts).map(|o| o.params)
}

/// Gradient descent with the projector applied after every step (and to the
/// initial point). The returned point is a fixed point of the projector.
pub fn projected_descent(
    objective: &dyn Objective,
    init: &ParamVector,
    projector: &dyn Projector,
    opts: &DescentOptions,
) -> Result<ParamVector> {
    minimize(objective, init, Some(projector), opts).map(|o| o.params)
}

/// The descent loop behind [`gradient_descent`] and [`projected_descent`].
///
/// Each iteration proposes `P(theta - step * grad)`. A proposal that raises
/// the objective is rejected and the step is halved for the rest of the run,
/// so accepted objective values never increase. The run stops after
/// `max_iters` proposals or once the gradient mapping
/// `|P(theta - step * grad) - theta| / step` falls to `grad_tol`.
pub fn minimize(
    objective: &dyn Objective,
    init: &ParamVector,
    projector: Option<&dyn Projector>,
    opts: &DescentOptions,
) -> Result<DescentOutcome> {
    opts.validate()?;
    let n = init.len();
    let mut theta = init.values().to_vec();
    if let Some(p) = projector {
        p.project(&mut theta);
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::Projection);
        }
    }
    let mut grad = vec![0.0; n];
    let mut value = objective.value_and_gradient(&theta, &mut grad);
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Divergence { iteration: 0 });
    }
    let mut history = vec![value];
    let mut step = opts.step_size;
    let min_step = opts.step_size * 1e-12;
    let mut candidate = vec![0.0; n];
    let mut candidate_grad = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        for i in 0..n {
            candidate[i] = theta[i] - step * grad[i];
        }
        if let Some(p) = projector {
            p.project(&mut candidate);
            if candidate.iter().any(|v| !v.is_finite()) {
                return Err(Error::Projection);
            }
        }
        let moved = theta
            .iter()
            .zip(&candidate)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if moved / step <= opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let cand_value = objective.value_and_gradient(&candidate, &mut candidate_grad);
        if !cand_value.is_finite() || candidate_grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence {
                iteration: iterations,
            });
        }
        if cand_value > value {
            step *= 0.5;
            if step < min_step {
                break;
            }
            continue;
        }
        std::mem::swap(&mut theta, &mut candidate);
        std::mem::swap(&mut grad, &mut candidate_grad);
        value = cand_value;
        history.push(value);
    }

    Ok(DescentOutcome {
        params: init.with_values(theta),
        iterations,
        converged,
        history,
    })
}

/// Clamps the coordinates in `range` to `[lo, hi]`.
pub fn project_box(theta: &mut [f64], range: std::ops::Range<usize>, lo: f64, hi: f64) {
    for v in &mut theta[range] {
        *v = v.clamp(lo, hi);
    }
}

/// Projects `values` onto the Euclidean ball of `radius` around `center`.
pub fn project_l2_ball(values: &mut [f64], center: &[f64], radius: f64) {
    debug_assert_eq!(values.len(), center.len());
    if radius == 0.0 {
        values.copy_from_slice(center);
        return;
    }
    if radius.is_infinite() {
        return;
    }
    let dist = values
        .iter()
        .zip(center)
        .map(|(v, c)| (v - c) * (v - c))
        .sum::<f64>()
        .sqrt();
    if dist > radius {
        let scale = radius / dist;
        for (v, c) in values.iter_mut().zip(center) {
            *v = c + (*v - c) * scale;
        }
    }
}

/// Projects `values` onto the L1 ball `{w : |w|_1 <= radius}` using the
/// sort-and-threshold construction.
pub fn project_l1_ball(values: &mut [f64], radius: f64) {
    if radius.is_infinite() {
        return;
    }
    if radius == 0.0 {
        values.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let norm: f64 = values.iter().map(|v| v.abs()).sum();
    if norm <= radius {
        return;
    }
    let mut mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (j, &m) in mags.iter().enumerate() {
        cumulative += m;
        let t = (cumulative - radius) / (j + 1) as f64;
        if m - t > 0.0 {
            threshold = t;
        } else {
            break;
        }
    }
    for v in values.iter_mut() {
        let shrunk = (v.abs() - threshold).max(0.0);
        *v = shrunk.copysign(*v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(theta: &[f64], grad: &mut [f64]) -> f64 {
        grad[0] = 2.0 * theta[0];
        theta[0] * theta[0]
    }

    fn opts() -> DescentOptions {
        DescentOptions::default().with_step(0.1).with_iters(10_000)
    }

    #[test]
    fn minimizes_a_parabola() {
        let out = gradient_descent(&square, &ParamVector::flat(vec![3.0]), &opts()).unwrap();
        assert!(out.values()[0].abs() <= 1e-6);
    }

    #[test]
    fn starting_at_the_minimizer_returns_it_unchanged() {
        let out = gradient_descent(&square, &ParamVector::flat(vec![0.0]), &opts()).unwrap();
        assert_eq!(out.values(), &[0.0]);
    }

    #[test]
    fn anisotropic_quadratic_matches_grid_search() {
        let f = |t: &[f64]| t[0] * t[0] + 10.0 * t[1] * t[1];
        let obj = |t: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * t[0];
            g[1] = 20.0 * t[1];
            f(t)
        };
        // Exhaustive grid over [-2, 2]^2 at 1e-3 resolution.
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in 0..=4000 {
            let a = -2.0 + i as f64 * 1e-3;
            for j in 0..=4000 {
                let b = -2.0 + j as f64 * 1e-3;
                let v = f(&[a, b]);
                if v < best.0 {
                    best = (v, a, b);
                }
            }
        }
        let opts = DescentOptions::default().with_step(0.05).with_iters(10_000);
        let out = gradient_descent(&obj, &ParamVector::flat(vec![1.0, 1.0]), &opts).unwrap();
        assert!((out.values()[0] - best.1).abs() <= 2e-3);
        assert!((out.values()[1] - best.2).abs() <= 2e-3);
    }

    #[test]
    fn too_large_a_step_still_decreases_monotonically() {
        let opts = DescentOptions::default().with_step(5.0).with_iters(200);
        let out = minimize(&square, &ParamVector::flat(vec![3.0]), None, &opts).unwrap();
        assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        assert!(out.final_value() < 9.0);
    }

    #[test]
    fn non_finite_objective_reports_iteration() {
        let bad = |t: &[f64], g: &mut [f64]| {
            g[0] = -1.0;
            if t[0] > 1.0 {
                f64::NAN
            } else {
                -t[0]
            }
        };
        let err = gradient_descent(&bad, &ParamVector::flat(vec![0.0]), &opts()).unwrap_err();
        assert!(matches!(err, Error::Divergence { iteration } if iteration > 0));
    }

    #[test]
    fn projection_to_half_line_hits_boundary() {
        let proj = |t: &mut [f64]| t[0] = t[0].max(1.0);
        let out = projected_descent(&square, &ParamVector::flat(vec![5.0]), &proj, &opts()).unwrap();
        assert_eq!(out.values()[0], 1.0);
    }

    #[test]
    fn identity_projection_is_bit_identical_to_plain_descent() {
        let obj = |t: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (t[0] - 0.3) + t[1];
            g[1] = 4.0 * t[1] + t[0];
            (t[0] - 0.3).powi(2) + 2.0 * t[1] * t[1] + t[0] * t[1]
        };
        let init = ParamVector::flat(vec![2.0, -1.5]);
        let ident = |_: &mut [f64]| {};
        let a = gradient_descent(&obj, &init, &opts()).unwrap();
        let b = projected_descent(&obj, &init, &ident, &opts()).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn unit_ball_constraint_matches_grid_oracle() {
        let obj = |t: &[f64], g: &mut [f64]| {
            g[0] = 2.0 * (t[0] - 3.0);
            (t[0] - 3.0).powi(2)
        };
        let proj = |t: &mut [f64]| project_l2_ball(t, &[0.0], 1.0);
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..=2000 {
            let x = -1.0 + i as f64 * 1e-3;
            let v = (x - 3.0f64).powi(2);
            if v < best.0 {
                best = (v, x);
            }
        }
        let out = projected_descent(&obj, &ParamVector::flat(vec![0.0]), &proj, &opts()).unwrap();
        assert_eq!(out.values()[0], 1.0);
        assert!((out.values()[0] - best.1).abs() <= 1e-3);
    }

    #[test]
    fn non_finite_projection_is_an_error() {
        let proj = |t: &mut [f64]| t[0] = f64::INFINITY;
        let err = projected_descent(&square, &ParamVector::flat(vec![1.0]), &proj, &opts());
        assert_eq!(err.unwrap_err(), Error::Projection);
    }

    #[test]
    fn l1_projection_properties() {
        let mut v = vec![3.0, -1.0, 0.5];
        project_l1_ball(&mut v, 2.0);
        let norm: f64 = v.iter().map(|x| x.abs()).sum();
        assert!((norm - 2.0).abs() < 1e-12);
        assert_eq!(v, vec![2.0, -0.0, 0.0]);
        let mut inside = vec![0.2, -0.3];
        project_l1_ball(&mut inside, 1.0);
        assert_eq!(inside, vec![0.2, -0.3]);
        let mut zero = vec![1.0, 2.0];
        project_l1_ball(&mut zero, 0.0);
        assert_eq!(zero, vec![0.0, 0.0]);
    }

    #[test]
    fn l2_ball_zero_radius_returns_center_exactly() {
        let mut v = vec![1.0, 2.0];
        project_l2_ball(&mut v, &[-0.0, 0.5], 0.0);
        assert_eq!(v[0].to_bits(), (-0.0f64).to_bits());
        assert_eq!(v[1], 0.5);
    }
}
