//! Variational optimization with score-function gradients: minimize
//! E_{psi ~ q_phi}[d(psi)] over a diagonal Gaussian search distribution by
//! Adam. One discriminator per step is trained against the mixture over the
//! sampled parameters; the trained scorer attributes a value to each draw.

use crate::budget::BudgetLedger;
use crate::error::{Error, Result};
use crate::optim::Adam;
use crate::rng::Rng;

/// Diagonal Gaussian over the simulator parameter space.
#[derive(Debug, Clone)]
pub struct SearchDistribution {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl SearchDistribution {
    pub fn new(mean: Vec<f64>, std: f64) -> Result<Self> {
        if !(std > 0.0) {
            return Err(Error::InvalidParameter(format!("std {std} must be > 0")));
        }
        let log_std = vec![std.ln(); mean.len()];
        Ok(Self { mean, log_std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(m, ls)| m + ls.exp() * rng.normal())
            .collect()
    }
}

/// Score-function gradient with a mean baseline:
/// g = mean_k[(d_k - dbar) * grad log q(psi_k)], for (mean, log-std).
pub fn vo_gradient(
    d_values: &[f64],
    psis: &[Vec<f64>],
    dist: &SearchDistribution,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let k = d_values.len();
    if k < 2 || psis.len() != k {
        return Err(Error::InvalidParameter(
            "vo_gradient needs at least 2 samples".into(),
        ));
    }
    if d_values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("non-finite divergence value".into()));
    }
    let dim = dist.dim();
    let baseline = d_values.iter().sum::<f64>() / k as f64;
    let mut g_mean = vec![0.0; dim];
    let mut g_log_std = vec![0.0; dim];
    for (d, psi) in d_values.iter().zip(psis) {
        let w = d - baseline;
        for i in 0..dim {
            let sd = dist.log_std[i].exp();
            let z = (psi[i] - dist.mean[i]) / sd;
            // grad_mu log q = z / sd; grad_logsd log q = z^2 - 1.
            g_mean[i] += w * z / sd;
            g_log_std[i] += w * (z * z - 1.0);
        }
    }
    for g in g_mean.iter_mut().chain(g_log_std.iter_mut()) {
        *g /= k as f64;
    }
    Ok((g_mean, g_log_std))
}

/// One mixture-discriminator evaluation: the overall divergence value and a
/// per-parameter-draw credit.
#[derive(Debug, Clone)]
pub struct MixtureEval {
    pub value: f64,
    pub per_psi: Vec<f64>,
}

/// A divergence that evaluates a whole mixture of generator configurations
/// against ground truth with a single trained discriminator.
pub trait MixtureDivergence {
    fn evaluate(
        &self,
        psis: &[Vec<f64>],
        ledger: &mut BudgetLedger,
        rng: &mut Rng,
    ) -> Result<MixtureEval>;
}

/// State of the search distribution after each step.
#[derive(Debug, Clone)]
pub struct AvoRecord {
    pub step: usize,
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value: f64,
    pub cumulative_samples: u64,
}

#[derive(Debug, Clone)]
pub struct AvoConfig {
    /// Parameter draws per step (the mixture size).
    pub k_draws: usize,
    /// Adam step size on (mean, log-std).
    pub adam_lr: f64,
    pub max_steps: usize,
    /// Parameter-space box the draws are clamped into.
    pub bounds: Vec<(f64, f64)>,
}

/// Run variational optimization. Each step draws `k_draws` parameters from
/// the search distribution, trains one discriminator against the pooled
/// mixture, converts per-draw credits into a score-function gradient, and
/// Adam-updates the distribution. A `BudgetExhausted` error from the
/// evaluator ends the run at the last completed step.
pub fn avo_run(
    divergence: &dyn MixtureDivergence,
    init: SearchDistribution,
    cfg: &AvoConfig,
    ledger: &mut BudgetLedger,
    rng: &mut Rng,
) -> Result<Vec<AvoRecord>> {
    if cfg.k_draws < 2 {
        return Err(Error::InvalidParameter("k_draws must be >= 2".into()));
    }
    let dim = init.dim();
    let mut dist = init;
    let mut adam = Adam::new(2 * dim);
    let mut trajectory = Vec::new();

    for step in 0..cfg.max_steps {
        let mut draw_rng = rng.split();
        let psis: Vec<Vec<f64>> = (0..cfg.k_draws)
            .map(|_| {
                let mut psi = dist.draw(&mut draw_rng);
                for (v, &(lo, hi)) in psi.iter_mut().zip(&cfg.bounds) {
                    *v = v.clamp(lo, hi);
                }
                psi
            })
            .collect();

        let mut eval_rng = rng.split();
        let eval = match divergence.evaluate(&psis, ledger, &mut eval_rng) {
            Ok(e) => e,
            Err(Error::BudgetExhausted { .. }) => break,
            Err(e) => return Err(e),
        };

        let (g_mean, g_log_std) = vo_gradient(&eval.per_psi, &psis, &dist)?;
        adam.begin_step();
        adam.update(0, &mut dist.mean, &g_mean, cfg.adam_lr);
        adam.update(dim, &mut dist.log_std, &g_log_std, cfg.adam_lr);

        trajectory.push(AvoRecord {
            step,
            mean: dist.mean.clone(),
            log_std: dist.log_std.clone(),
            value: eval.value,
            cumulative_samples: ledger.total(),
        });
    }
    Ok(trajectory)
}
