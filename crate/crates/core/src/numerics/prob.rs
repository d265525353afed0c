use crate::constants::DIST_SUM_TOL;
use crate::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `ln sigmoid(x) = -softplus(-x)`.
pub fn log_sigmoid(x: f64) -> f64 {
    -softplus(-x)
}

/// Max-shifted softmax. Scores must be nonempty and finite.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    assert!(!scores.is_empty(), "softmax of an empty score vector");
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// `ln softmax(scores)`, computed without forming the probabilities.
pub fn log_softmax(scores: &[f64]) -> Vec<f64> {
    assert!(!scores.is_empty(), "log_softmax of an empty score vector");
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_total = scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - max - log_total).collect()
}

fn check_distribution(name: &str, p: &[f64]) -> Result<()> {
    if let Some(i) = p.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::Distribution(format!(
            "{name}[{i}] = {} is not a nonnegative finite probability",
            p[i]
        )));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > DIST_SUM_TOL {
        return Err(Error::Distribution(format!("{name} sums to {total}")));
    }
    Ok(())
}

/// `KL(p || q) = sum_i p_i ln(p_i / q_i)` with `0 ln(0 / q) = 0`.
pub fn kl_categorical(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            expected: p.len(),
            got: q.len(),
        });
    }
    check_distribution("p", p)?;
    check_distribution("q", q)?;
    let mut kl = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::Support { index: i });
        }
        kl += pi * (pi / qi).ln();
    }
    // Rounding can leave a tiny negative sum for p ~= q.
    Ok(kl.max(0.0))
}

/// Half the L1 distance between two distributions.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SplitMix64;
    use proptest::prelude::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]), vec![0.5, 0.5]);
        let third = softmax(&[1000.0, 1000.0, 1000.0]);
        for p in third {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_matches_extended_precision_oracle() {
        // exp-normalize of (1, 2, 3) evaluated with 50-digit arithmetic.
        let oracle = [
            0.090_030_573_170_380_46,
            0.244_728_471_054_797_64,
            0.665_240_955_774_821_9,
        ];
        for (p, o) in softmax(&[1.0, 2.0, 3.0]).iter().zip(oracle) {
            assert!((p - o).abs() <= 1e-12);
        }
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_categorical(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
        let v = kl_categorical(&[1.0, 0.0], &[0.5, 0.5]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn kl_support_and_shape_errors() {
        assert_eq!(
            kl_categorical(&[0.5, 0.5], &[1.0, 0.0]).unwrap_err(),
            Error::Support { index: 1 }
        );
        assert!(matches!(
            kl_categorical(&[1.0], &[0.5, 0.5]),
            Err(Error::Dimension { .. })
        ));
        assert!(matches!(
            kl_categorical(&[0.6, 0.6], &[0.5, 0.5]),
            Err(Error::Distribution(_))
        ));
    }

    #[test]
    fn kl_matches_term_by_term_summation() {
        let mut rng = SplitMix64::new(2024);
        let draw = |rng: &mut SplitMix64| {
            let raw: Vec<f64> = (0..4).map(|_| rng.next_f64() + 0.05).collect();
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / s).collect::<Vec<_>>()
        };
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let oracle = p[0] * (p[0] / q[0]).ln()
            + p[1] * (p[1] / q[1]).ln()
            + p[2] * (p[2] / q[2]).ln()
            + p[3] * (p[3] / q[3]).ln();
        assert!((kl_categorical(&p, &q).unwrap() - oracle).abs() <= 1e-12);
    }

    #[test]
    fn stable_logistic_helpers() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) == 1.0);
        assert!((softplus(0.0) - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(log_sigmoid(-1000.0).is_finite());
    }

    fn simplex(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(0.01f64..1.0, n).prop_map(|raw| {
            let s: f64 = raw.iter().sum();
            raw.into_iter().map(|r| r / s).collect()
        })
    }

    proptest! {
        #[test]
        fn kl_is_nonnegative_and_zero_on_diagonal(p in simplex(5), q in simplex(5)) {
            prop_assert_eq!(kl_categorical(&p, &p).unwrap(), 0.0);
            prop_assert!(kl_categorical(&p, &q).unwrap() >= 0.0);
        }

        #[test]
        fn softmax_is_a_shift_invariant_distribution(
            scores in prop::collection::vec(-50.0f64..50.0, 1..8),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&scores);
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            prop_assert!(p.iter().all(|v| *v > 0.0));
            let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
