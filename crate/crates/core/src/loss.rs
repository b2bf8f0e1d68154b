//! The two-sample cross-entropy loss that a discriminator minimizes:
//!
//! L(f, P, Q) = -1/2 mean(log f(x_P)) - 1/2 mean(log(1 - f(x_Q)))
//!
//! ln 2 minus the achieved loss is the divergence estimate everywhere in this
//! crate.

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Scores clipped to [CLIP, 1 - CLIP] before logarithms; the loss is undefined
/// at exactly 0 or 1.
pub const CLIP: f64 = 1e-7;

/// A trained discriminator: maps a feature row to a probability in [0, 1].
pub trait Scorer {
    fn score(&self, x: &[f64]) -> f64;
}

impl<F: Fn(&[f64]) -> f64> Scorer for F {
    fn score(&self, x: &[f64]) -> f64 {
        self(x)
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

fn clip(p: f64) -> f64 {
    p.clamp(CLIP, 1.0 - CLIP)
}

/// Streaming mean. For a run of identical terms the increments vanish and the
/// mean stays bit-exact, which keeps the constant-1/2 scorer at exactly ln 2.
pub(crate) fn stream_mean(values: impl Iterator<Item = f64>) -> f64 {
    let mut mean = 0.0;
    let mut k = 0u64;
    for v in values {
        k += 1;
        mean += (v - mean) / k as f64;
    }
    mean
}

/// Cross-entropy of `f` on a P-sample and a Q-sample, each class weighted 1/2.
pub fn cross_entropy<S: Scorer + ?Sized>(f: &S, xp: &Dataset, xq: &Dataset) -> Result<f64> {
    if xp.n_rows() == 0 || xq.n_rows() == 0 {
        return Err(Error::EmptySample);
    }
    let lp = stream_mean(xp.rows_iter().map(|row| clip(f.score(row)).ln()));
    let lq = stream_mean(xq.rows_iter().map(|row| (1.0 - clip(f.score(row))).ln()));
    let loss = -0.5 * lp - 0.5 * lq;
    debug_assert!(loss.is_finite());
    Ok(loss)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> (Dataset, Dataset) {
        let xp = Dataset::new(vec![-1.0, -2.0, -3.0], 1).unwrap();
        let xq = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], 1).unwrap();
        (xp, xq)
    }

    #[test]
    fn constant_half_gives_ln2() {
        let (xp, xq) = pair();
        let l = cross_entropy(&|_: &[f64]| 0.5, &xp, &xq).unwrap();
        assert!((l - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn perfect_separation_is_clipped_small() {
        let (xp, xq) = pair();
        let f = |x: &[f64]| if x[0] < 0.0 { 1.0 } else { 0.0 };
        let l = cross_entropy(&f, &xp, &xq).unwrap();
        assert!(l >= 0.0);
        assert!(l <= 2e-7, "clipped loss {l} above bound");
    }

    #[test]
    fn constant_three_quarters_hand_value() {
        // 0.5*(-ln 0.75) + 0.5*(-ln 0.25), evaluated by hand.
        let (xp, xq) = pair();
        let l = cross_entropy(&|_: &[f64]| 0.75, &xp, &xq).unwrap();
        assert!((l - 0.836_988_216_785_835_7).abs() < 1e-12);
    }

    #[test]
    fn empty_sample_errors() {
        // Empty samples are rejected at construction, before the loss sees them.
        assert!(matches!(
            Dataset::from_rows(&[]),
            Err(crate::error::Error::EmptySample)
        ));
    }

    #[test]
    fn poor_scorer_exceeds_ln2_and_is_not_clamped() {
        // Scoring the wrong way round drives the loss above ln 2; raw values
        // must propagate unclamped.
        let (xp, xq) = pair();
        let f = |x: &[f64]| if x[0] < 0.0 { 0.1 } else { 0.9 };
        let l = cross_entropy(&f, &xp, &xq).unwrap();
        assert!(l > std::f64::consts::LN_2);
    }
}
