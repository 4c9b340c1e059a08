use rand::Rng;

use super::NnError;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax(v: &[f64]) -> Vec<f64> {
    let mask = vec![true; v.len()];
    masked_softmax(v, &mask)
}

/// Softmax over the positions where `mask` is true. Masked entries are exactly 0.
///
/// A NaN score at a real position makes the whole output NaN.
pub fn masked_softmax(scores: &[f64], mask: &[bool]) -> Vec<f64> {
    debug_assert_eq!(scores.len(), mask.len());
    if scores.iter().zip(mask).any(|(s, &m)| m && s.is_nan()) {
        return vec![f64::NAN; scores.len()];
    }
    let max = scores
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&s, _)| s)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return vec![0.0; scores.len()];
    }
    let mut out: Vec<f64> = scores
        .iter()
        .zip(mask)
        .map(|(&s, &m)| if m { (s - max).exp() } else { 0.0 })
        .collect();
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= sum);
    out
}

/// Gradient with respect to the scores given `α = masked_softmax(scores)` and `dα`.
pub fn masked_softmax_backward(alpha: &[f64], dalpha: &[f64], mask: &[bool]) -> Vec<f64> {
    let weighted: f64 = alpha.iter().zip(dalpha).map(|(a, d)| a * d).sum();
    alpha
        .iter()
        .zip(dalpha)
        .zip(mask)
        .map(|((&a, &d), &m)| if m { a * (d - weighted) } else { 0.0 })
        .collect()
}

/// Negative log-likelihood of `gold` under `softmax(logits)` and its gradient.
pub fn cross_entropy(logits: &[f64], gold: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln();
    let loss = lse - logits[gold];
    let mut d = softmax(logits);
    d[gold] -= 1.0;
    (loss, d)
}

fn check_rate(rate: f64) -> Result<(), NnError> {
    if (0.0..1.0).contains(&rate) {
        Ok(())
    } else {
        Err(NnError::BadRate(rate.to_string()))
    }
}

/// Inverted-dropout multipliers: 0 with probability `rate`, `1/(1-rate)` otherwise.
///
/// Returns `None` when dropout is inactive (inference or zero rate), in which
/// case no random numbers are drawn.
pub fn dropout_mask(
    len: usize,
    rate: f64,
    training: bool,
    rng: &mut impl Rng,
) -> Result<Option<Vec<f64>>, NnError> {
    check_rate(rate)?;
    if !training || rate == 0.0 {
        return Ok(None);
    }
    let keep = 1.0 / (1.0 - rate);
    Ok(Some(
        (0..len)
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect(),
    ))
}

pub fn dropout(v: &[f64], rate: f64, training: bool, rng: &mut impl Rng) -> Result<Vec<f64>, NnError> {
    Ok(match dropout_mask(v.len(), rate, training, rng)? {
        Some(mask) => v.iter().zip(&mask).map(|(x, m)| x * m).collect(),
        None => v.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_uniform_and_reference() {
        let u = softmax(&[0.3; 5]);
        for p in u {
            assert_relative_eq!(p, 0.2, epsilon = 1e-15);
        }
        let e: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|x| x.exp()).collect();
        let z: f64 = e.iter().sum();
        let s = softmax(&[1.0, 2.0, 3.0]);
        for (a, b) in s.iter().zip(&e) {
            assert_relative_eq!(*a, b / z, epsilon = 1e-15);
        }
    }

    #[test]
    fn softmax_survives_large_inputs() {
        let s = softmax(&[1000.0, 1000.0, -1000.0]);
        assert_relative_eq!(s[0], 0.5);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn masked_entries_are_exactly_zero() {
        let a = masked_softmax(&[1.0, 50.0, 2.0], &[true, false, true]);
        assert_eq!(a[1], 0.0);
        assert_relative_eq!(a[0] + a[2], 1.0, epsilon = 1e-15);
        assert_eq!(masked_softmax(&[3.0, 1.0], &[false, true]), vec![0.0, 1.0]);
        assert!(masked_softmax(&[f64::NAN, 1.0], &[true, true]).iter().all(|p| p.is_nan()));
        assert_eq!(masked_softmax(&[f64::NAN, 1.0], &[false, true]), vec![0.0, 1.0]);
    }

    #[test]
    fn cross_entropy_values() {
        let (l, d) = cross_entropy(&[0.7; 4], 2);
        assert_relative_eq!(l, 4f64.ln(), epsilon = 1e-14);
        assert_relative_eq!(d.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
        let (l, _) = cross_entropy(&[0.0, 0.0, 60.0, 0.0], 2);
        assert!(l < 1e-20);
    }

    #[test]
    fn cross_entropy_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for gold in 0..4 {
            let logits: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (_, d) = cross_entropy(&logits, gold);
            let eps = 1e-5;
            for k in 0..4 {
                let mut hi = logits.clone();
                hi[k] += eps;
                let mut lo = logits.clone();
                lo[k] -= eps;
                let num = (cross_entropy(&hi, gold).0 - cross_entropy(&lo, gold).0) / (2.0 * eps);
                assert_relative_eq!(d[k], num, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn masked_softmax_gradient_matches_finite_differences() {
        let scores = [0.3, -1.2, 0.8, 2.0, 0.1];
        let mask = [true, true, false, true, true];
        let weights = [0.5, -1.0, 3.0, 0.25, 2.0];
        let f = |s: &[f64]| -> f64 {
            masked_softmax(s, &mask).iter().zip(&weights).map(|(a, w)| a * w).sum()
        };
        let alpha = masked_softmax(&scores, &mask);
        let ds = masked_softmax_backward(&alpha, &weights, &mask);
        let eps = 1e-6;
        for k in 0..scores.len() {
            let mut hi = scores;
            hi[k] += eps;
            let mut lo = scores;
            lo[k] -= eps;
            assert_relative_eq!(ds[k], (f(&hi) - f(&lo)) / (2.0 * eps), epsilon = 1e-9);
        }
    }

    #[test]
    fn dropout_identity_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = [1.0, -2.0, 3.0];
        assert_eq!(dropout(&v, 0.0, true, &mut rng).unwrap(), v);
        assert_eq!(dropout(&v, 0.9, false, &mut rng).unwrap(), v);
        assert!(matches!(dropout(&v, 1.0, true, &mut rng), Err(NnError::BadRate(_))));
        assert!(matches!(dropout(&v, -0.1, false, &mut rng), Err(NnError::BadRate(_))));
    }

    #[test]
    fn dropout_preserves_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let v = vec![1.5; 100_000];
        let out = dropout(&v, 0.5, true, &mut rng).unwrap();
        let mean = out.iter().sum::<f64>() / out.len() as f64;
        assert!((mean - 1.5).abs() / 1.5 < 0.02, "mean {mean}");
        assert!(out.iter().all(|&x| x == 0.0 || x == 3.0));
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            v in proptest::collection::vec(-30.0f64..30.0, 1..20),
            c in -100.0f64..100.0,
        ) {
            let s = softmax(&v);
            prop_assert!((s.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            prop_assert!(s.iter().all(|&p| p > 0.0));
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            for (a, b) in s.iter().zip(softmax(&shifted)) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
