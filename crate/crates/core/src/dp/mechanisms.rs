//! Base noise mechanisms: Laplace sampling, noisy integer counts, and the
//! exponential mechanism over a finite score list.

use super::DpError;
use crate::rng::SeededRng;

/// Draws one Laplace(0, `scale`) sample by inverting the CDF on a single
/// uniform draw, so each call consumes exactly one value from the stream.
pub fn laplace_sample(rng: &mut SeededRng, scale: f64) -> Result<f64, DpError> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(DpError::InvalidScale(scale));
    }
    let u = rng.uniform() - 0.5;
    // Guard the u = -0.5 endpoint, where the inverse CDF diverges.
    let t = (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE);
    Ok(-scale * u.signum() * t.ln())
}

/// Adds Laplace(1/eps) noise to each count (counts have sensitivity 1 under
/// a single-point change), rounds to the nearest integer, and clamps at
/// zero. The noisy values are safe to publish under eps-differential
/// privacy.
pub fn noisy_counts(counts: &[f64], eps: f64, rng: &mut SeededRng) -> Result<Vec<u64>, DpError> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(DpError::InvalidEpsilon(eps));
    }
    let scale = 1.0 / eps;
    counts
        .iter()
        .map(|&c| {
            if !(c.is_finite() && c >= 0.0) {
                return Err(DpError::InvalidCount(c));
            }
            let noisy = c + laplace_sample(rng, scale)?;
            Ok(noisy.round().max(0.0) as u64)
        })
        .collect()
}

/// Samples an index with probability proportional to
/// exp(eps * (score - max_score) / (2 * sensitivity)).
///
/// `eps = 0` degenerates to a uniform choice. Exactly one uniform value is
/// consumed per call.
pub fn exponential_mechanism(
    scores: &[f64],
    eps: f64,
    sensitivity: f64,
    rng: &mut SeededRng,
) -> Result<usize, DpError> {
    exponential_mechanism_weighted(scores, None, eps, sensitivity, rng)
}

/// Exponential mechanism with a data-independent prior over the outcomes:
/// samples index i with probability proportional to
/// prior[i] * exp(eps * (score[i] - max_score) / (2 * sensitivity)).
///
/// The prior reweights outcomes without touching the privacy guarantee, as
/// long as it does not depend on the data. `None` means uniform. Exactly
/// one uniform value is consumed per call.
pub fn exponential_mechanism_weighted(
    scores: &[f64],
    prior: Option<&[f64]>,
    eps: f64,
    sensitivity: f64,
    rng: &mut SeededRng,
) -> Result<usize, DpError> {
    if scores.is_empty() {
        return Err(DpError::EmptyScores);
    }
    if let Some(i) = scores.iter().position(|s| !s.is_finite()) {
        return Err(DpError::NonFiniteScore(i));
    }
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(DpError::InvalidEpsilon(eps));
    }
    if !(sensitivity > 0.0 && sensitivity.is_finite()) {
        return Err(DpError::InvalidSensitivity(sensitivity));
    }
    if let Some(p) = prior {
        if p.len() != scores.len() {
            return Err(DpError::PriorMismatch {
                prior: p.len(),
                scores: scores.len(),
            });
        }
        if let Some(i) = p.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(DpError::InvalidPrior(i));
        }
    }

    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weight_at = |i: usize| -> f64 {
        let base = (eps * (scores[i] - max) / (2.0 * sensitivity)).exp();
        match prior {
            Some(p) => p[i] * base,
            None => base,
        }
    };
    let total: f64 = (0..scores.len()).map(weight_at).sum();
    let target = rng.uniform() * total;
    let mut acc = 0.0;
    for i in 0..scores.len() {
        acc += weight_at(i);
        if target < acc {
            return Ok(i);
        }
    }
    // Floating-point slack can leave target at or above the final
    // accumulator; the last index is then the right answer.
    Ok(scores.len() - 1)
}


#[cfg(test)]
mod property_tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn laplace_samples_are_finite(seed in 0u64..1_000_000, scale in 1e-6..1e6f64) {
            let mut rng = SeededRng::new(seed);
            let x = laplace_sample(&mut rng, scale).unwrap();
            prop_assert!(x.is_finite());
        }

        #[test]
        fn exponential_mechanism_returns_valid_index(
            seed in 0u64..1_000_000,
            scores in prop::collection::vec(-100.0..100.0f64, 1..40),
            eps in 0.0..20.0f64,
        ) {
            let mut rng = SeededRng::new(seed);
            let i = exponential_mechanism(&scores, eps, 1.0, &mut rng).unwrap();
            prop_assert!(i < scores.len());
        }

        #[test]
        fn noisy_counts_lengths_match(
            seed in 0u64..1_000_000,
            counts in prop::collection::vec(0.0..1000.0f64, 0..30),
        ) {
            let mut rng = SeededRng::new(seed);
            let noisy = noisy_counts(&counts, 0.5, &mut rng).unwrap();
            prop_assert_eq!(noisy.len(), counts.len());
        }
    }
}
