//! Fast invariant checks exposed through the `selftest` CLI subcommand.

use std::f64::consts::LN_2;

use crate::budget::BudgetLedger;
use crate::capacity::CapacityFunction;
use crate::dataset::Dataset;
use crate::divergence::{
    estimate_ad_grid, DivergenceEstimate, Estimator, FamilyKind, GapCriterion, GrowthPolicy,
    PseudoDivergenceFamily, Sampler,
};
use crate::error::Result;
use crate::gbdt::{early_stop_scan, ensemble_prefix_divergence, fit_ensemble, GbdtConfig};
use crate::loss::cross_entropy;
use crate::nn::{train_ad_nn, NnConfig, Schedule, Variant};
use crate::opt::bo::expected_improvement;
use crate::opt::gp::gp_fit;
use crate::rng::Rng;
use crate::sim::{GaussianCloud, Task, XorTask};

struct Check {
    name: &'static str,
    run: fn(u64) -> std::result::Result<(), String>,
}

fn ok_if(cond: bool, detail: String) -> std::result::Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(detail)
    }
}

fn check_cross_entropy_constant(_seed: u64) -> std::result::Result<(), String> {
    let d = Dataset::new(vec![0.0, 1.0, 2.0], 1).map_err(|e| e.to_string())?;
    let l = cross_entropy(&|_: &[f64]| 0.5, &d, &d).map_err(|e| e.to_string())?;
    ok_if((l - LN_2).abs() < 1e-15, format!("constant-1/2 loss {l}"))
}

fn check_capacity_monotone(_seed: u64) -> std::result::Result<(), String> {
    for cap in [
        CapacityFunction::linear(0.25, 100).unwrap(),
        CapacityFunction::logarithmic(0.25, 100).unwrap(),
    ] {
        for i in 0..100 {
            let a = cap.eval(i).map_err(|e| e.to_string())?;
            let b = cap.eval(i + 1).map_err(|e| e.to_string())?;
            if !(a < b) {
                return Err(format!("capacity not strict at {i}: {a} vs {b}"));
            }
        }
    }
    Ok(())
}

fn check_ledger(_seed: u64) -> std::result::Result<(), String> {
    let mut fwd = BudgetLedger::new();
    let mut rev = BudgetLedger::new();
    let ns = [3u64, 0, 17, 117, 4];
    for &n in &ns {
        fwd.record("t", n);
    }
    for &n in ns.iter().rev() {
        rev.record("t", n);
    }
    ok_if(
        fwd.total() == rev.total() && fwd.total() == ns.iter().sum::<u64>(),
        format!("totals {} vs {}", fwd.total(), rev.total()),
    )
}

fn check_xor_determinism(seed: u64) -> std::result::Result<(), String> {
    let t = XorTask::default();
    let mut ledger = BudgetLedger::new();
    let a = t
        .sample(&[0.4], 64, &mut Rng::new(seed), &mut ledger)
        .map_err(|e| e.to_string())?;
    let b = t
        .sample(&[0.4], 64, &mut Rng::new(seed), &mut ledger)
        .map_err(|e| e.to_string())?;
    ok_if(a == b, "xor draws differ across identical seeds".into())
}

struct StubFamily;

struct StubEstimator {
    alpha: f64,
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
        let value = self.alpha * LN_2 / 2.0;
        Ok(DivergenceEstimate {
            value,
            alpha_used: self.alpha,
            train_loss: LN_2 - value,
            valid_loss: LN_2 - value,
            samples_used: (tp.n_rows() + tq.n_rows() + vp.n_rows() + vq.n_rows()) as u64,
        })
    }
}

impl PseudoDivergenceFamily for StubFamily {
    fn kind(&self) -> FamilyKind {
        FamilyKind::ModelRestricted
    }
    fn at(&self, alpha: f64) -> Box<dyn Estimator + '_> {
        Box::new(StubEstimator { alpha })
    }
}

struct Unit;

impl Sampler for Unit {
    fn dim(&self) -> usize {
        1
    }
    fn sample(&self, n: usize, _rng: &mut Rng, ledger: &mut BudgetLedger) -> Result<Dataset> {
        ledger.record("unit", n as u64);
        Dataset::new(vec![0.0; n], 1)
    }
}

fn check_grid_scan(seed: u64) -> std::result::Result<(), String> {
    let crit = GapCriterion::new(1e-2, 8, 64, GrowthPolicy::Doubling).unwrap();
    let mut ledger = BudgetLedger::new();
    let mut rng = Rng::new(seed);
    let out = estimate_ad_grid(&StubFamily, &Unit, &Unit, 0.05, &crit, &mut ledger, &mut rng)
        .map_err(|e| e.to_string())?;
    ok_if(
        (out.estimate.alpha_used - 0.70).abs() < 1e-12,
        format!("grid settled at {}", out.estimate.alpha_used),
    )
}

fn check_boosted_stop_index(_seed: u64) -> std::result::Result<(), String> {
    let cap = CapacityFunction::linear(0.25, 100).unwrap();
    let (i, _) = early_stop_scan(&cap, 100, |i| Ok(LN_2 * 0.9f64.powi(i as i32)))
        .map_err(|e| e.to_string())?;
    ok_if(i == 26, format!("stub stop index {i}"))
}

fn check_gp_interpolation(_seed: u64) -> std::result::Result<(), String> {
    let xs: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.25]).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 0.2 + 0.6 * x[0]).collect();
    let gp = gp_fit(&xs, &ys).map_err(|e| e.to_string())?;
    for (x, y) in xs.iter().zip(&ys) {
        let (m, _) = gp.predict(x);
        if (m - y).abs() > 1e-6 {
            return Err(format!("gp at {x:?}: {m} vs {y}"));
        }
    }
    Ok(())
}

fn check_ei_zero_variance(_seed: u64) -> std::result::Result<(), String> {
    ok_if(
        expected_improvement(0.2, 0.0, 0.1) == 0.0,
        "EI at zero variance nonzero".into(),
    )
}

fn check_prefix_property(seed: u64) -> std::result::Result<(), String> {
    let mut rng = Rng::new(seed);
    let p = GaussianCloud {
        mean: vec![-1.0],
        std: 0.3,
    };
    let q = GaussianCloud {
        mean: vec![1.0],
        std: 0.3,
    };
    let mut ledger = BudgetLedger::new();
    let xp = p.sample(96, &mut rng, &mut ledger).map_err(|e| e.to_string())?;
    let xq = q.sample(96, &mut rng, &mut ledger).map_err(|e| e.to_string())?;
    let cfg = GbdtConfig {
        n_trees: 8,
        ..GbdtConfig::default_linear()
    };
    let ens = fit_ensemble(&xp, &xq, &cfg).map_err(|e| e.to_string())?;
    let d0 = ensemble_prefix_divergence(&ens, 0, &xp, &xq).map_err(|e| e.to_string())?;
    ok_if(d0 == 0.0, format!("empty prefix divergence {d0}"))
}

fn check_ema_closed_form(seed: u64) -> std::result::Result<(), String> {
    let mut rng = Rng::new(seed);
    let p = GaussianCloud {
        mean: vec![-0.5],
        std: 0.4,
    };
    let q = GaussianCloud {
        mean: vec![0.5],
        std: 0.4,
    };
    let mut ledger = BudgetLedger::new();
    let tp = p.sample(64, &mut rng, &mut ledger).map_err(|e| e.to_string())?;
    let tq = q.sample(64, &mut rng, &mut ledger).map_err(|e| e.to_string())?;
    let cfg = NnConfig {
        hidden: 8,
        max_steps: 30,
        ..NnConfig::default()
    };
    let fit = train_ad_nn(
        &tp,
        &tq,
        &tp,
        &tq,
        Schedule::Adaptive(Variant::Dropout),
        &cfg,
        &mut rng,
    )
    .map_err(|e| e.to_string())?;
    let rho = cfg.ema_coeff;
    for (t, row) in fit.trace.iter().enumerate() {
        let mut expect = rho.powi(t as i32 + 1) * LN_2;
        for k in 0..=t {
            expect += (1.0 - rho) * rho.powi(k as i32) * fit.trace[t - k].batch_loss;
        }
        if (row.l_acc - expect).abs() > 1e-12 {
            return Err(format!("ema mismatch at step {t}"));
        }
    }
    Ok(())
}

const CHECKS: &[Check] = &[
    Check {
        name: "cross_entropy_constant_half",
        run: check_cross_entropy_constant,
    },
    Check {
        name: "capacity_strictly_increasing",
        run: check_capacity_monotone,
    },
    Check {
        name: "ledger_additive_reorderable",
        run: check_ledger,
    },
    Check {
        name: "xor_sampler_deterministic",
        run: check_xor_determinism,
    },
    Check {
        name: "ad_grid_scan_semantics",
        run: check_grid_scan,
    },
    Check {
        name: "boosted_stub_stop_index",
        run: check_boosted_stop_index,
    },
    Check {
        name: "gp_interpolates_training_points",
        run: check_gp_interpolation,
    },
    Check {
        name: "ei_zero_at_zero_variance",
        run: check_ei_zero_variance,
    },
    Check {
        name: "ensemble_prefix_zero",
        run: check_prefix_property,
    },
    Check {
        name: "nn_ema_closed_form",
        run: check_ema_closed_form,
    },
];

/// Run all checks, print one line each, return the number of failures.
pub fn run_selftest(seed: u64) -> usize {
    let mut failures = 0;
    for c in CHECKS {
        match (c.run)(seed) {
            Ok(()) => println!("selftest {:<34} ok", c.name),
            Err(detail) => {
                failures += 1;
                println!("selftest {:<34} FAIL: {detail}", c.name);
            }
        }
    }
    failures
}
