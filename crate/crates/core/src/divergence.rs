//! Divergence estimation between two black-box samplers.
//!
//! A pseudo-divergence family indexes discriminator trainers by a capacity
//! `alpha` in [0, 1]; the adaptive divergence scans the family from the
//! weakest member upward and stops at the first capacity whose estimate
//! clears the threshold `(1 - alpha) * ln 2`. Every estimate first searches
//! for the smallest training-set size at which train and validation losses
//! agree within the gap criterion, charging all draws to the budget ledger.

use std::f64::consts::LN_2;

use crate::budget::BudgetLedger;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::loss::{cross_entropy, Scorer};
use crate::rng::Rng;

/// Result of one divergence evaluation.
#[derive(Debug, Clone)]
pub struct DivergenceEstimate {
    /// ln 2 minus the achieved validation loss, in nats. Raw value; may be
    /// slightly negative from finite-sample noise.
    pub value: f64,
    /// Capacity of the family member that produced the value.
    pub alpha_used: f64,
    pub train_loss: f64,
    pub valid_loss: f64,
    /// Generator draws consumed while producing this estimate.
    pub samples_used: u64,
}

impl DivergenceEstimate {
    pub fn gap(&self) -> f64 {
        (self.train_loss - self.valid_loss).abs()
    }
}

/// How the training-size search grows its probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrowthPolicy {
    /// Double to bracket, then bisect toward the smallest passing size.
    Bisection,
    /// Double until the criterion holds; cheaper when probes are expensive.
    Doubling,
}

/// Train/validation agreement criterion from which estimate sample sizes are
/// derived.
#[derive(Debug, Clone)]
pub struct GapCriterion {
    pub tolerance: f64,
    pub min_n: usize,
    pub max_n: usize,
    pub growth: GrowthPolicy,
}

impl GapCriterion {
    pub fn new(tolerance: f64, min_n: usize, max_n: usize, growth: GrowthPolicy) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance < LN_2) {
            return Err(Error::InvalidParameter(format!(
                "tolerance {tolerance} outside (0, ln 2)"
            )));
        }
        if min_n == 0 || min_n >= max_n {
            return Err(Error::InvalidParameter(format!(
                "size bounds {min_n}..{max_n} invalid"
            )));
        }
        Ok(Self {
            tolerance,
            min_n,
            max_n,
            growth,
        })
    }

    /// Defaults used for tree-backed estimators.
    pub fn for_gbdt() -> Self {
        Self::new(1e-2, 64, 65_536, GrowthPolicy::Bisection).unwrap()
    }

    /// Defaults used for network-backed estimators.
    pub fn for_nn() -> Self {
        Self::new(5e-2, 256, 65_536, GrowthPolicy::Doubling).unwrap()
    }
}

/// One size/capacity probe, kept for diagnostics and serialized by the
/// harness.
#[derive(Debug, Clone)]
pub struct Probe {
    pub alpha: f64,
    pub n: usize,
    pub train_loss: f64,
    pub valid_loss: f64,
}

/// A source of feature rows; implementations charge every draw to the ledger.
pub trait Sampler {
    fn dim(&self) -> usize;
    fn sample(&self, n: usize, rng: &mut Rng, ledger: &mut BudgetLedger) -> Result<Dataset>;
}

/// Trains a discriminator at one fixed capacity.
pub trait Trainer {
    fn fit(&self, xp: &Dataset, xq: &Dataset, rng: &mut Rng) -> Result<Box<dyn Scorer>>;
}

/// One divergence evaluation on fixed train/validation splits. Backends with
/// capacity-dependent training loops (boosted ensembles, scheduled networks)
/// implement this directly; plain trainers go through [`ScorerEstimator`].
pub trait Estimator {
    fn estimate(
        &self,
        train_p: &Dataset,
        train_q: &Dataset,
        valid_p: &Dataset,
        valid_q: &Dataset,
        rng: &mut Rng,
    ) -> Result<DivergenceEstimate>;
}

/// Family construction, per the three standard routes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    ModelRestricted,
    Regularized,
    Boosted,
}

/// An ordered family of pseudo-divergence evaluators indexed by capacity.
/// `alpha = 1` must be the highest-capacity configuration available.
pub trait PseudoDivergenceFamily {
    fn kind(&self) -> FamilyKind;
    fn at(&self, alpha: f64) -> Box<dyn Estimator + '_>;
}

/// Adapts a [`Trainer`] at capacity `alpha` into an [`Estimator`]: fit on the
/// training split, report ln 2 minus the validation loss.
pub struct ScorerEstimator<T> {
    pub alpha: f64,
    pub trainer: T,
}

impl<T: Trainer> Estimator for ScorerEstimator<T> {
    fn estimate(
        &self,
        train_p: &Dataset,
        train_q: &Dataset,
        valid_p: &Dataset,
        valid_q: &Dataset,
        rng: &mut Rng,
    ) -> Result<DivergenceEstimate> {
        let scorer = self.trainer.fit(train_p, train_q, rng)?;
        let train_loss = cross_entropy(scorer.as_ref(), train_p, train_q)?;
        let valid_loss = cross_entropy(scorer.as_ref(), valid_p, valid_q)?;
        let samples_used =
            (train_p.n_rows() + train_q.n_rows() + valid_p.n_rows() + valid_q.n_rows()) as u64;
        Ok(DivergenceEstimate {
            value: LN_2 - valid_loss,
            alpha_used: self.alpha,
            train_loss,
            valid_loss,
            samples_used,
        })
    }
}

/// Outcome of the minimal-training-size search.
#[derive(Debug, Clone)]
pub struct SizeSearch {
    /// Smallest probed per-class training size satisfying the criterion.
    pub n: usize,
    /// The estimate produced at `n`.
    pub estimate: DivergenceEstimate,
    /// Every probe made, in order.
    pub probes: Vec<Probe>,
}

fn probe_at(
    est: &dyn Estimator,
    n: usize,
    p: &dyn Sampler,
    q: &dyn Sampler,
    ledger: &mut BudgetLedger,
    rng: &mut Rng,
) -> Result<DivergenceEstimate> {
    // Fresh train/validation draws per probe, independent sub-streams per side.
    let mut r = rng.split();
    let tp = p.sample(n, &mut r, ledger)?;
    let mut r = rng.split();
    let tq = q.sample(n, &mut r, ledger)?;
    let mut r = rng.split();
    let vp = p.sample(n, &mut r, ledger)?;
    let mut r = rng.split();
    let vq = q.sample(n, &mut r, ledger)?;
    let mut r = rng.split();
    est.estimate(&tp, &tq, &vp, &vq, &mut r)
}

/// Search for the smallest training-set size whose train/validation gap is
/// within the criterion. The validation set matches the training set size, so
/// each probe draws `4n` rows. Returns the accepted size together with the
/// estimate produced there.
pub fn min_training_size(
    est: &dyn Estimator,
    p: &dyn Sampler,
    q: &dyn Sampler,
    crit: &GapCriterion,
    ledger: &mut BudgetLedger,
    rng: &mut Rng,
) -> Result<SizeSearch> {
    let mut probes = Vec::new();
    let mut best: Option<DivergenceEstimate> = None;

    let run = |n: usize, probes: &mut Vec<Probe>, ledger: &mut BudgetLedger, rng: &mut Rng| {
        let e = probe_at(est, n, p, q, ledger, rng)?;
        probes.push(Probe {
            alpha: e.alpha_used,
            n,
            train_loss: e.train_loss,
            valid_loss: e.valid_loss,
        });
        Ok::<DivergenceEstimate, Error>(e)
    };

    // Doubling phase: bracket the first passing size.
    let mut n = crit.min_n;
    let mut lo_fail = 0usize;
    let (mut hi, mut hi_est) = loop {
        let e = run(n, &mut probes, ledger, rng)?;
        let pass = e.gap() <= crit.tolerance;
        if best.as_ref().map_or(true, |b| e.gap() < b.gap()) {
            best = Some(e.clone());
        }
        if pass {
            break (n, e);
        }
        lo_fail = n;
        if n >= crit.max_n {
            let b = best.expect("at least one probe ran");
            return Err(Error::GapUnreachable {
                tolerance: crit.tolerance,
                best_gap: b.gap(),
                n,
                best: Box::new(b),
            });
        }
        n = (n * 2).min(crit.max_n);
    };

    if crit.growth == GrowthPolicy::Bisection && lo_fail > 0 {
        // Refine toward the smallest passing size. Probes are expensive, so
        // stop once the bracket is within ~12% rather than at unit width.
        let mut lo = lo_fail;
        while hi - lo > (hi / 8).max(1) {
            let mid = lo + (hi - lo) / 2;
            let e = run(mid, &mut probes, ledger, rng)?;
            if e.gap() <= crit.tolerance {
                hi = mid;
                hi_est = e;
            } else {
                lo = mid;
            }
        }
    }

    Ok(SizeSearch {
        n: hi,
        estimate: hi_est,
        probes,
    })
}

/// Estimate the Jensen-Shannon divergence with the family's full-capacity
/// trainer, sizing the sample per the gap criterion.
pub fn estimate_jsd<T: Trainer>(
    trainer: &T,
    p: &dyn Sampler,
    q: &dyn Sampler,
    crit: &GapCriterion,
    ledger: &mut BudgetLedger,
    rng: &mut Rng,
) -> Result<SizeSearch> {
    let est = ScorerEstimator {
        alpha: 1.0,
        trainer: ByRef(trainer),
    };
    min_training_size(&est, p, q, crit, ledger, rng)
}

/// Borrow adapter so callers can keep ownership of their trainer.
pub struct ByRef<'a, T>(pub &'a T);

impl<T: Trainer> Trainer for ByRef<'_, T> {
    fn fit(&self, xp: &Dataset, xq: &Dataset, rng: &mut Rng) -> Result<Box<dyn Scorer>> {
        self.0.fit(xp, xq, rng)
    }
}

/// Grid-search adaptive divergence: walk capacities upward from 0 in steps of
/// `eps` and return the first member whose estimate reaches
/// `(1 - alpha) * ln 2`; fall back to the full-capacity member if the scan
/// exhausts the grid. Members retrain from scratch per probe.
pub fn estimate_ad_grid(
    family: &dyn PseudoDivergenceFamily,
    p: &dyn Sampler,
    q: &dyn Sampler,
    eps: f64,
    crit: &GapCriterion,
    ledger: &mut BudgetLedger,
    rng: &mut Rng,
) -> Result<AdGridResult> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter(format!("eps = {eps} outside (0, 1)")));
    }
    let start = ledger.total();
    let mut probes = Vec::new();
    for k in 0.. {
        let alpha = (k as f64 * eps).min(1.0);
        let member = family.at(alpha);
        let search = min_training_size(member.as_ref(), p, q, crit, ledger, rng)?;
        probes.extend(search.probes);
        let threshold = (1.0 - alpha) * LN_2;
        if search.estimate.value >= threshold || alpha >= 1.0 {
            let mut estimate = search.estimate;
            // Report the cumulative cost of the whole scan, not just the
            // final member's probes.
            estimate.samples_used = ledger.total() - start;
            return Ok(AdGridResult { estimate, probes });
        }
    }
    unreachable!("grid always terminates at alpha = 1")
}

/// Adaptive divergence estimate plus the probe log of the scan.
#[derive(Debug, Clone)]
pub struct AdGridResult {
    pub estimate: DivergenceEstimate,
    pub probes: Vec<Probe>,
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Family with an exact closed-form evaluator, for pinning scan semantics.
    struct StubFamily<F: Fn(f64) -> f64> {
        d: F,
    }

    struct StubEstimator {
        alpha: f64,
        value: f64,
    }

    impl Estimator for StubEstimator {
        fn estimate(
            &self,
            tp: &Dataset,
            tq: &Dataset,
            vp: &Dataset,
            vq: &Dataset,
            _rng: &mut Rng,
        ) -> Result<DivergenceEstimate> {
            let loss = LN_2 - self.value;
            Ok(DivergenceEstimate {
                value: self.value,
                alpha_used: self.alpha,
                train_loss: loss,
                valid_loss: loss,
                samples_used: (tp.n_rows() + tq.n_rows() + vp.n_rows() + vq.n_rows()) as u64,
            })
        }
    }

    impl<F: Fn(f64) -> f64> PseudoDivergenceFamily for StubFamily<F> {
        fn kind(&self) -> FamilyKind {
            FamilyKind::ModelRestricted
        }
        fn at(&self, alpha: f64) -> Box<dyn Estimator + '_> {
            Box::new(StubEstimator {
                alpha,
                value: (self.d)(alpha),
            })
        }
    }

    struct UnitSampler;

    impl Sampler for UnitSampler {
        fn dim(&self) -> usize {
            1
        }
        fn sample(&self, n: usize, _rng: &mut Rng, ledger: &mut BudgetLedger) -> Result<Dataset> {
            ledger.record("unit", n as u64);
            Dataset::new(vec![0.0; n], 1)
        }
    }

    fn crit() -> GapCriterion {
        GapCriterion::new(1e-2, 8, 1024, GrowthPolicy::Doubling).unwrap()
    }

    #[test]
    fn stub_grid_settles_just_above_the_crossing() {
        // D_alpha = alpha * ln2 / 2 crosses (1 - alpha) ln2 at alpha = 2/3;
        // with a dyadic grid the scan stops at 11/16 = 0.6875, the smallest
        // grid point at or above the crossing, and the returned value
        // overshoots the ideal ln2 / 3 by at most one eps step.
        let fam = StubFamily {
            d: |a| a * LN_2 / 2.0,
        };
        let mut ledger = BudgetLedger::new();
        let mut rng = Rng::new(1);
        let eps = 1.0 / 16.0;
        let out =
            estimate_ad_grid(&fam, &UnitSampler, &UnitSampler, eps, &crit(), &mut ledger, &mut rng)
                .unwrap();
        assert_eq!(out.estimate.alpha_used, 0.6875);
        assert!((out.estimate.value - 0.6875 * LN_2 / 2.0).abs() < 1e-15);
        assert!(out.estimate.value >= LN_2 / 3.0 - 1e-12);
        assert!(out.estimate.value <= LN_2 / 3.0 + eps * LN_2);
    }

    #[test]
    fn stub_grid_first_passing_point_at_coarser_grid() {
        let fam = StubFamily {
            d: |a| a * LN_2 / 2.0,
        };
        let mut ledger = BudgetLedger::new();
        let mut rng = Rng::new(1);
        let out = estimate_ad_grid(
            &fam,
            &UnitSampler,
            &UnitSampler,
            0.05,
            &crit(),
            &mut ledger,
            &mut rng,
        )
        .unwrap();
        // 0.65 < 2/3 < 0.70, so the scan settles on 0.70.
        assert!((out.estimate.alpha_used - 0.70).abs() < 1e-12);
        assert!((out.estimate.value - 0.35 * LN_2).abs() < 1e-12);
    }

    #[test]
    fn stub_grid_scan_invariant_below_crossing() {
        let fam = StubFamily {
            d: |a| a * LN_2 / 2.0,
        };
        let mut ledger = BudgetLedger::new();
        let mut rng = Rng::new(1);
        let out = estimate_ad_grid(
            &fam,
            &UnitSampler,
            &UnitSampler,
            0.05,
            &crit(),
            &mut ledger,
            &mut rng,
        )
        .unwrap();
        // Every probed alpha below the returned one failed the condition.
        for p in &out.probes {
            let value = LN_2 - p.valid_loss;
            if p.alpha < out.estimate.alpha_used - 1e-12 {
                assert!(value < (1.0 - p.alpha) * LN_2);
            }
        }
    }

    #[test]
    fn stub_grid_zero_family_exhausts_to_alpha_one() {
        // D identically 0: no grid point satisfies the condition before 1,
        // and at alpha = 1 the threshold is 0, so D_1 = 0 qualifies.
        let fam = StubFamily { d: |_| 0.0 };
        let mut ledger = BudgetLedger::new();
        let mut rng = Rng::new(1);
        let out = estimate_ad_grid(
            &fam,
            &UnitSampler,
            &UnitSampler,
            0.05,
            &crit(),
            &mut ledger,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.estimate.alpha_used, 1.0);
        assert_eq!(out.estimate.value, 0.0);
    }

    #[test]
    fn stub_family_d1_ordering_and_nonnegativity() {
        // Exact evaluators: ordering must hold exactly (D1), values >= 0 (P1).
        let fam = StubFamily {
            d: |a| 0.3 * LN_2 * a * a,
        };
        let mut rng = Rng::new(3);
        let mut ledger = BudgetLedger::new();
        let s = UnitSampler;
        let mut prev = -1.0;
        for k in 0..=10 {
            let alpha = k as f64 / 10.0;
            let e = min_training_size(fam.at(alpha).as_ref(), &s, &s, &crit(), &mut ledger, &mut rng)
                .unwrap()
                .estimate;
            assert!(e.value >= 0.0);
            assert!(e.value >= prev);
            prev = e.value;
        }
    }

    #[test]
    fn min_training_size_constant_estimator_returns_min_n() {
        // Zero gap at any size: the very first probe is accepted.
        let est = StubEstimator {
            alpha: 1.0,
            value: 0.0,
        };
        let mut ledger = BudgetLedger::new();
        let mut rng = Rng::new(9);
        let c = crit();
        let out = min_training_size(&est, &UnitSampler, &UnitSampler, &c, &mut ledger, &mut rng)
            .unwrap();
        assert_eq!(out.n, c.min_n);
        assert_eq!(out.probes.len(), 1);
        // 4n rows drawn for the single probe.
        assert_eq!(ledger.total(), 4 * c.min_n as u64);
    }

    /// Estimator whose gap shrinks deterministically with n, for exercising
    /// the search policies.
    struct GapByN;

    impl Estimator for GapByN {
        fn estimate(
            &self,
            tp: &Dataset,
            _tq: &Dataset,
            _vp: &Dataset,
            _vq: &Dataset,
            _rng: &mut Rng,
        ) -> Result<DivergenceEstimate> {
            let n = tp.n_rows() as f64;
            let gap = 1.0 / n.sqrt();
            Ok(DivergenceEstimate {
                value: 0.2,
                alpha_used: 1.0,
                train_loss: LN_2 - 0.2 - gap,
                valid_loss: LN_2 - 0.2,
                samples_used: 4 * tp.n_rows() as u64,
            })
        }
    }

    #[test]
    fn doubling_returns_first_passing_power() {
        // gap(n) = n^-1/2 <= 0.05 first holds at n = 400; doubling from 8
        // reaches it at 512.
        let c = GapCriterion::new(0.05, 8, 65_536, GrowthPolicy::Doubling).unwrap();
        let mut ledger = BudgetLedger::new();
        let mut rng = Rng::new(4);
        let out =
            min_training_size(&GapByN, &UnitSampler, &UnitSampler, &c, &mut ledger, &mut rng)
                .unwrap();
        assert_eq!(out.n, 512);
    }

    #[test]
    fn bisection_refines_below_doubling() {
        let c = GapCriterion::new(0.05, 8, 65_536, GrowthPolicy::Bisection).unwrap();
        let mut ledger = BudgetLedger::new();
        let mut rng = Rng::new(4);
        let out =
            min_training_size(&GapByN, &UnitSampler, &UnitSampler, &c, &mut ledger, &mut rng)
                .unwrap();
        assert!(out.n < 512, "bisection should tighten below 512, got {}", out.n);
        assert!(out.n >= 400, "returned size must satisfy the criterion, got {}", out.n);
        assert!(out.estimate.gap() <= c.tolerance);
    }

    #[test]
    fn unreachable_criterion_carries_best_gap() {
        struct BigGap;
        impl Estimator for BigGap {
            fn estimate(
                &self,
                tp: &Dataset,
                _tq: &Dataset,
                _vp: &Dataset,
                _vq: &Dataset,
                _rng: &mut Rng,
            ) -> Result<DivergenceEstimate> {
                Ok(DivergenceEstimate {
                    value: 0.1,
                    alpha_used: 1.0,
                    train_loss: 0.0,
                    valid_loss: 0.5,
                    samples_used: 4 * tp.n_rows() as u64,
                })
            }
        }
        let c = GapCriterion::new(1e-2, 8, 64, GrowthPolicy::Doubling).unwrap();
        let mut ledger = BudgetLedger::new();
        let mut rng = Rng::new(4);
        let err = min_training_size(&BigGap, &UnitSampler, &UnitSampler, &c, &mut ledger, &mut rng)
            .unwrap_err();
        match err {
            Error::GapUnreachable { best_gap, best, .. } => {
                assert!((best_gap - 0.5).abs() < 1e-12);
                assert!((best.gap() - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
