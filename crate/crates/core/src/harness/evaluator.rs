//! Maps a configured divergence onto the estimator machinery and enforces
//! the generator-sample budget around every draw.

use std::f64::consts::LN_2;

use crate::budget::BudgetLedger;
use crate::dataset::Dataset;
use crate::divergence::{
    min_training_size, DivergenceEstimate, Estimator, Sampler, ScorerEstimator, SizeSearch,
};
use crate::error::{Error, Result};
use crate::gbdt::{boosted_ad, BoostedAdEstimator, GbdtTrainer, TrajectoryPoint};
use crate::harness::config::{Backend, DivergenceKind, ExperimentConfig};
use crate::loss::cross_entropy;
use crate::nn::{train_ad_nn, NnAdEstimator, Schedule, TraceRow, Variant};
use crate::opt::vo::{MixtureDivergence, MixtureEval};
use crate::rng::Rng;
use crate::sim::{Task, TaskSampler};

/// Caps a sampler at the experiment budget; a draw that would cross the cap
/// fails with `BudgetExhausted` so the running estimate is abandoned.
pub struct BudgetedSampler<'a> {
    pub inner: &'a dyn Sampler,
    pub cap: u64,
}

impl Sampler for BudgetedSampler<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sample(&self, n: usize, rng: &mut Rng, ledger: &mut BudgetLedger) -> Result<Dataset> {
        if ledger.total() + n as u64 > self.cap {
            return Err(Error::BudgetExhausted {
                requested: n as u64,
                remaining: self.cap.saturating_sub(ledger.total()),
            });
        }
        self.inner.sample(n, rng, ledger)
    }
}

/// The configured divergence estimator between a generator configuration and
/// ground truth.
#[derive(Debug, Clone)]
pub struct DivergenceEvaluator {
    pub kind: DivergenceKind,
    pub backend: Backend,
    pub gbdt: crate::gbdt::GbdtConfig,
    pub nn: crate::nn::NnConfig,
    pub crit: crate::divergence::GapCriterion,
}

/// Backend-specific artifacts captured when an estimate is rerun for dumping.
#[derive(Debug, Clone, Default)]
pub struct EstimateArtifacts {
    pub trajectory: Vec<TrajectoryPoint>,
    pub trace: Vec<TraceRow>,
}

impl DivergenceEvaluator {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            kind: cfg.divergence,
            backend: cfg.backend,
            gbdt: cfg.gbdt.clone(),
            nn: cfg.nn.clone(),
            crit: cfg.crit.clone(),
        }
    }

    fn nn_schedule(&self) -> Schedule {
        match self.kind {
            DivergenceKind::AdDropout => Schedule::Adaptive(Variant::Dropout),
            DivergenceKind::AdL2 => Schedule::Adaptive(Variant::L2),
            // Constant zero strength with the R1 penalty: the plain-JSD
            // network baseline.
            _ => Schedule::Constant(Variant::L2, 0.0),
        }
    }

    /// The estimator for fixed train/validation datasets.
    pub fn estimator(&self) -> Box<dyn Estimator> {
        match (self.kind, self.backend) {
            (DivergenceKind::Jsd, Backend::Gbdt) => Box::new(ScorerEstimator {
                alpha: 1.0,
                trainer: GbdtTrainer {
                    cfg: self.gbdt.clone(),
                },
            }),
            (DivergenceKind::AdLinear | DivergenceKind::AdLog, _) => {
                Box::new(BoostedAdEstimator {
                    cfg: self.gbdt.clone(),
                })
            }
            _ => Box::new(NnAdEstimator {
                schedule: self.nn_schedule(),
                cfg: self.nn.clone(),
            }),
        }
    }

    /// One budgeted divergence evaluation with the sample-size criterion.
    pub fn evaluate(
        &self,
        p: &dyn Sampler,
        q: &dyn Sampler,
        ledger: &mut BudgetLedger,
        rng: &mut Rng,
    ) -> Result<SizeSearch> {
        let est = self.estimator();
        min_training_size(est.as_ref(), p, q, &self.crit, ledger, rng)
    }

    /// Like [`evaluate`](Self::evaluate), but when the gap criterion is
    /// unreachable within max_n the best-achieved estimate is used instead of
    /// failing; optimizers keep running on the degraded value (the samples
    /// are spent either way).
    pub fn evaluate_degrading(
        &self,
        p: &dyn Sampler,
        q: &dyn Sampler,
        ledger: &mut BudgetLedger,
        rng: &mut Rng,
    ) -> Result<DivergenceEstimate> {
        match self.evaluate(p, q, ledger, rng) {
            Ok(s) => Ok(s.estimate),
            Err(Error::GapUnreachable { best, .. }) => Ok(*best),
            Err(e) => Err(e),
        }
    }

    /// Evaluation at one fixed per-class size, bypassing the size search.
    pub fn evaluate_at(
        &self,
        n: usize,
        p: &dyn Sampler,
        q: &dyn Sampler,
        ledger: &mut BudgetLedger,
        rng: &mut Rng,
    ) -> Result<DivergenceEstimate> {
        let est = self.estimator();
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

    /// Rerun the backend at a fixed size to capture its per-iteration
    /// artifacts (loss trajectory or training trace) for dumping.
    pub fn artifacts_at(
        &self,
        n: usize,
        p: &dyn Sampler,
        q: &dyn Sampler,
        ledger: &mut BudgetLedger,
        rng: &mut Rng,
    ) -> Result<EstimateArtifacts> {
        let mut r = rng.split();
        let tp = p.sample(n, &mut r, ledger)?;
        let mut r = rng.split();
        let tq = q.sample(n, &mut r, ledger)?;
        let mut r = rng.split();
        let vp = p.sample(n, &mut r, ledger)?;
        let mut r = rng.split();
        let vq = q.sample(n, &mut r, ledger)?;
        let mut out = EstimateArtifacts::default();
        match (self.kind, self.backend) {
            (DivergenceKind::AdLinear | DivergenceKind::AdLog, _) => {
                let fit = boosted_ad(&tp, &tq, &vp, &vq, &self.gbdt)?;
                out.trajectory = fit.trajectory;
            }
            (_, Backend::Nn) => {
                let mut r = rng.split();
                let fit =
                    train_ad_nn(&tp, &tq, &vp, &vq, self.nn_schedule(), &self.nn, &mut r)?;
                out.trace = fit.trace;
            }
            _ => {}
        }
        Ok(out)
    }
}

/// One discriminator per optimization step, trained between ground truth and
/// the pooled mixture over the drawn parameters. The training size grows per
/// draw by doubling until the train/validation gap criterion holds (or the
/// probe ladder is exhausted, in which case the best-gap probe is used).
pub struct NnMixtureDivergence<'a> {
    pub task: &'a dyn Task,
    pub evaluator: &'a DivergenceEvaluator,
    /// Starting per-draw training size m; validation matches, so one probe
    /// costs 4 * K * m generator draws.
    pub samples_per_draw: usize,
    pub budget: u64,
}

impl NnMixtureDivergence<'_> {
    fn draw_side(
        &self,
        psi_opt: Option<&[f64]>,
        m: usize,
        k: usize,
        rng: &mut Rng,
        ledger: &mut BudgetLedger,
    ) -> Result<Dataset> {
        // Ground truth draws K*m rows; a generator side draws m rows per psi.
        let sampler: Box<dyn Sampler + '_> = match psi_opt {
            None => Box::new(TaskSampler::nominal(self.task)),
            Some(psi) => Box::new(TaskSampler::new(self.task, psi.to_vec())),
        };
        let capped = BudgetedSampler {
            inner: sampler.as_ref(),
            cap: self.budget,
        };
        let n = if psi_opt.is_none() { m * k } else { m };
        let mut r = rng.split();
        capped.sample(n, &mut r, ledger)
    }
}

impl MixtureDivergence for NnMixtureDivergence<'_> {
    fn evaluate(
        &self,
        psis: &[Vec<f64>],
        ledger: &mut BudgetLedger,
        rng: &mut Rng,
    ) -> Result<MixtureEval> {
        let k = psis.len();
        let crit = &self.evaluator.crit;
        let mut m = self.samples_per_draw;
        let mut best: Option<(f64, NnProbe)> = None;

        loop {
            // Fresh draws per probe: train + validation for both sides.
            let train_real = self.draw_side(None, m, k, rng, ledger)?;
            let valid_real = self.draw_side(None, m, k, rng, ledger)?;
            let mut train_parts = Vec::with_capacity(k);
            let mut valid_parts = Vec::with_capacity(k);
            for psi in psis {
                train_parts.push(self.draw_side(Some(psi), m, k, rng, ledger)?);
                valid_parts.push(self.draw_side(Some(psi), m, k, rng, ledger)?);
            }
            let train_mix = pool(&train_parts)?;
            let valid_mix = pool(&valid_parts)?;

            let mut r = rng.split();
            let fit = train_ad_nn(
                &train_real,
                &train_mix,
                &valid_real,
                &valid_mix,
                self.evaluator.nn_schedule(),
                &self.evaluator.nn,
                &mut r,
            )?;
            let gap = (fit.train_loss - fit.valid_loss).abs();
            let probe = NnProbe {
                fit_valid_loss: fit.valid_loss,
                net: fit.net,
                valid_real,
                valid_parts,
            };
            if gap <= crit.tolerance {
                return finish(probe, k);
            }
            if best.as_ref().map_or(true, |(g, _)| gap < *g) {
                best = Some((gap, probe));
            }
            if m * 2 > crit.max_n || m >= crit.max_n {
                // Criterion unreachable within the ladder; degrade to the
                // best-gap probe rather than aborting the run.
                let (_, probe) = best.expect("at least one probe ran");
                return finish(probe, k);
            }
            m *= 2;
        }
    }
}

struct NnProbe {
    fit_valid_loss: f64,
    net: crate::nn::Mlp,
    valid_real: Dataset,
    valid_parts: Vec<Dataset>,
}

fn finish(probe: NnProbe, k: usize) -> Result<MixtureEval> {
    let value = LN_2 - probe.fit_valid_loss;
    let mut per_psi = Vec::with_capacity(k);
    for part in &probe.valid_parts {
        let loss = cross_entropy(&probe.net, &probe.valid_real, part)?;
        per_psi.push(LN_2 - loss);
    }
    Ok(MixtureEval { value, per_psi })
}

fn pool(parts: &[Dataset]) -> Result<Dataset> {
    let cols = parts[0].n_cols();
    let mut flat = Vec::new();
    for p in parts {
        flat.extend_from_slice(p.as_slice());
    }
    Dataset::new(flat, cols)
}
