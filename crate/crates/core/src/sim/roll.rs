//! Two-turn Archimedean spiral with radial Gaussian noise, rotated by theta.

use crate::budget::BudgetLedger;
use crate::dataset::Dataset;
use crate::error::Result;
use crate::rng::Rng;
use crate::sim::{check_bounds, Task};

#[derive(Debug, Clone)]
pub struct RollTask {
    pub turns: f64,
    pub radial_noise: f64,
}

impl Default for RollTask {
    fn default() -> Self {
        Self {
            turns: 2.0,
            radial_noise: 0.05,
        }
    }
}

impl Task for RollTask {
    fn name(&self) -> &'static str {
        "roll"
    }

    fn dim(&self) -> usize {
        2
    }

    fn param_dim(&self) -> usize {
        1
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(-std::f64::consts::PI, std::f64::consts::PI)]
    }

    fn nominal(&self) -> Vec<f64> {
        vec![0.0]
    }

    fn sample(
        &self,
        psi: &[f64],
        n: usize,
        rng: &mut Rng,
        ledger: &mut BudgetLedger,
    ) -> Result<Dataset> {
        check_bounds(self, psi)?;
        let theta = psi[0];
        let (sin, cos) = theta.sin_cos();
        let t_max = self.turns * 2.0 * std::f64::consts::PI;
        ledger.record("roll", n as u64);
        let mut xs = Vec::with_capacity(2 * n);
        for _ in 0..n {
            let t = rng.uniform_in(0.0, t_max);
            let r = t / t_max + self.radial_noise * rng.normal();
            let (st, ct) = t.sin_cos();
            let x = r * ct;
            let y = r * st;
            xs.push(cos * x - sin * y);
            xs.push(sin * x + cos * y);
        }
        Dataset::new(xs, 2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_zero_reproduces_ground_truth() {
        let t = RollTask::default();
        let mut ledger = BudgetLedger::new();
        let a = t.sample(&[0.0], 64, &mut Rng::new(2), &mut ledger).unwrap();
        let b = t.ground_truth(64, &mut Rng::new(2), &mut ledger).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rotation_equivariance_exact() {
        let t = RollTask::default();
        let theta: f64 = -1.1;
        let mut ledger = BudgetLedger::new();
        let rotated = t
            .sample(&[theta], 64, &mut Rng::new(9), &mut ledger)
            .unwrap();
        let base = t.ground_truth(64, &mut Rng::new(9), &mut ledger).unwrap();
        let (sin, cos) = (-theta).sin_cos();
        for (r, b) in rotated.rows_iter().zip(base.rows_iter()) {
            assert!((cos * r[0] - sin * r[1] - b[0]).abs() < 1e-12);
            assert!((sin * r[0] + cos * r[1] - b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn single_row_accounting() {
        let t = RollTask::default();
        let mut ledger = BudgetLedger::new();
        let d = t.ground_truth(1, &mut Rng::new(4), &mut ledger).unwrap();
        assert_eq!(d.n_rows(), 1);
        assert_eq!(ledger.total(), 1);
    }
}
