use std::time::Instant;

use centaur_core::constants::GRAD_CHECK_THRESHOLD;
use centaur_core::gradcheck::{check_case, registry, run_cases, run_registry, GradCheckCase, POINTS_PER_OBJECTIVE};
use centaur_core::numerics::Objective;

#[test]
fn every_registered_gradient_matches_finite_differences() {
    let start = Instant::now();
    let summary = run_registry().unwrap();
    for c in &summary.checks {
        println!("{:<24} max_rel_error={:.3e}", c.name, c.max_rel_error);
        assert_eq!(c.points, POINTS_PER_OBJECTIVE);
        assert!(c.passed, "{} failed with {:.3e}", c.name, c.max_rel_error);
    }
    assert!(summary.passed);
    assert!(summary.worst().unwrap().max_rel_error <= GRAD_CHECK_THRESHOLD);
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn registry_covers_the_required_objectives() {
    let names: Vec<&str> = registry().iter().map(|c| c.name).collect();
    for required in [
        "logistic_linear",
        "squared_linear",
        "logistic_mlp",
        "squared_mlp",
        "reward_triplet_linear",
        "policy_kl_regularized",
        "constrained_decisions",
        "constrained_importance",
    ] {
        assert!(names.contains(&required), "missing {required}");
    }
    let mut sorted = names.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), names.len());
}

/// Wraps a registered objective and negates its analytic gradient.
struct SignFlip(Box<dyn Objective>);

impl Objective for SignFlip {
    fn value_and_gradient(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let v = self.0.value_and_gradient(theta, grad);
        for g in grad.iter_mut() {
            *g = -*g;
        }
        v
    }
}

#[test]
fn a_sign_flipped_gradient_is_rejected() {
    let flipped = GradCheckCase {
        name: "logistic_linear_flipped",
        build: |s| {
            let (obj, n) = (registry()[0].build)(s)?;
            Ok((Box::new(SignFlip(obj)), n))
        },
    };
    let summary = run_cases(&[registry()[0], flipped], 7, 3, GRAD_CHECK_THRESHOLD).unwrap();
    assert!(summary.checks[0].passed);
    assert!(!summary.checks[1].passed);
    assert!(summary.checks[1].max_rel_error > 1.0);
    assert!(!summary.passed);
}

#[test]
fn checks_are_deterministic_and_validate_points() {
    let case = registry()[2];
    assert_eq!(check_case(&case, 3, 2, 1e-4).unwrap(), check_case(&case, 3, 2, 1e-4).unwrap());
    assert!(check_case(&case, 3, 0, 1e-4).is_err());
}
