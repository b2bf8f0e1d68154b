//! Seeded synthetic generators. Each task is a parameterized sampler whose
//! nominal parameters define the ground-truth distribution; every draw is
//! charged to the budget ledger.

mod detector;
mod roll;
mod xor;

pub use detector::DetectorTask;
pub use roll::RollTask;
pub use xor::XorTask;

use crate::budget::BudgetLedger;
use crate::dataset::Dataset;
use crate::divergence::Sampler;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// A parameterized generator with a nominal configuration.
pub trait Task: Send + Sync {
    fn name(&self) -> &'static str;
    /// Feature dimension of emitted rows.
    fn dim(&self) -> usize;
    fn param_dim(&self) -> usize;
    /// Admissible parameter box.
    fn bounds(&self) -> Vec<(f64, f64)>;
    /// The nominal parameters the optimizers are expected to recover.
    fn nominal(&self) -> Vec<f64>;
    /// Draw `n` i.i.d. rows at `psi`, charging the ledger.
    fn sample(
        &self,
        psi: &[f64],
        n: usize,
        rng: &mut Rng,
        ledger: &mut BudgetLedger,
    ) -> Result<Dataset>;

    /// Draw from the nominal configuration.
    fn ground_truth(&self, n: usize, rng: &mut Rng, ledger: &mut BudgetLedger) -> Result<Dataset> {
        let psi = self.nominal();
        self.sample(&psi, n, rng, ledger)
    }
}

pub(crate) fn check_bounds(task: &dyn Task, psi: &[f64]) -> Result<()> {
    let bounds = task.bounds();
    if psi.len() != bounds.len() {
        return Err(Error::OutOfBounds(format!(
            "{}: psi has {} parameters, expected {}",
            task.name(),
            psi.len(),
            bounds.len()
        )));
    }
    for (v, (lo, hi)) in psi.iter().zip(&bounds) {
        if !(v >= lo && v <= hi) {
            return Err(Error::OutOfBounds(format!(
                "{}: parameter {v} outside [{lo}, {hi}]",
                task.name()
            )));
        }
    }
    Ok(())
}

/// Look a task up by its config name.
pub fn task_by_name(name: &str) -> Result<Box<dyn Task>> {
    match name {
        "xor" => Ok(Box::new(XorTask::default())),
        "roll" => Ok(Box::new(RollTask::default())),
        "detector" => Ok(Box::new(DetectorTask::default())),
        other => Err(Error::Config(format!("unknown task '{other}'"))),
    }
}

/// A task pinned at one parameter point, usable as a divergence-layer sampler.
pub struct TaskSampler<'a> {
    pub task: &'a dyn Task,
    pub psi: Vec<f64>,
    pub tag: &'static str,
}

impl<'a> TaskSampler<'a> {
    pub fn new(task: &'a dyn Task, psi: Vec<f64>) -> Self {
        Self {
            task,
            psi,
            tag: "generator",
        }
    }

    pub fn nominal(task: &'a dyn Task) -> Self {
        Self {
            task,
            psi: task.nominal(),
            tag: "ground_truth",
        }
    }
}

impl Sampler for TaskSampler<'_> {
    fn dim(&self) -> usize {
        self.task.dim()
    }

    fn sample(&self, n: usize, rng: &mut Rng, ledger: &mut BudgetLedger) -> Result<Dataset> {
        self.task.sample(&self.psi, n, rng, ledger)
    }
}

/// Isotropic Gaussian cloud; a plain sampler for calibration and tests.
#[derive(Debug, Clone)]
pub struct GaussianCloud {
    pub mean: Vec<f64>,
    pub std: f64,
}

impl Sampler for GaussianCloud {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn sample(&self, n: usize, rng: &mut Rng, ledger: &mut BudgetLedger) -> Result<Dataset> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        ledger.record("gaussian", n as u64);
        let d = self.mean.len();
        let mut xs = Vec::with_capacity(n * d);
        for _ in 0..n {
            for m in &self.mean {
                xs.push(m + self.std * rng.normal());
            }
        }
        Dataset::new(xs, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn by_name_round_trip() {
        for name in ["xor", "roll", "detector"] {
            let t = task_by_name(name).unwrap();
            assert_eq!(t.name(), name);
        }
        assert!(task_by_name("nope").is_err());
    }

    #[test]
    fn ledger_counts_every_draw() {
        let mut ledger = BudgetLedger::new();
        let mut rng = Rng::new(1);
        let t = XorTask::default();
        t.sample(&[0.3], 100, &mut rng, &mut ledger).unwrap();
        t.ground_truth(50, &mut rng, &mut ledger).unwrap();
        assert_eq!(ledger.total(), 150);
    }

    #[test]
    fn out_of_bounds_parameter_rejected() {
        let mut ledger = BudgetLedger::new();
        let mut rng = Rng::new(1);
        let t = XorTask::default();
        assert!(t.sample(&[9.0], 10, &mut rng, &mut ledger).is_err());
        assert_eq!(ledger.total(), 0);
    }

    #[test]
    fn gaussian_cloud_shape_and_determinism() {
        let g = GaussianCloud {
            mean: vec![1.0, -1.0],
            std: 0.5,
        };
        let mut ledger = BudgetLedger::new();
        let a = g.sample(64, &mut Rng::new(5), &mut ledger).unwrap();
        let b = g.sample(64, &mut Rng::new(5), &mut ledger).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_cols(), 2);
        assert_eq!(a.n_rows(), 64);
    }
}
