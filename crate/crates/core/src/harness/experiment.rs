//! Repeated budgeted optimization runs with quartile aggregation.
//!
//! Each replica runs on its own seed (base + index) and its own ledger; the
//! per-evaluation best-so-far curves are step-interpolated onto the union of
//! all sample positions and summarized by median and quartiles. All CSV
//! artifacts embed the config as `#`-prefixed header lines.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::budget::BudgetLedger;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, OptimizerKind};
use crate::harness::evaluator::{BudgetedSampler, DivergenceEvaluator, NnMixtureDivergence};
use crate::opt::bo::{bo_run, BoState};
use crate::opt::vo::{avo_run, AvoConfig, SearchDistribution};
use crate::rng::Rng;
use crate::sim::{task_by_name, TaskSampler};

/// One evaluation (BO) or one search-distribution update (AVO).
#[derive(Debug, Clone)]
pub struct EvalRow {
    pub index: usize,
    pub psi: Vec<f64>,
    pub value: f64,
    pub cumulative_samples: u64,
    /// min over evaluations so far of |psi - psi*| (Euclidean).
    pub best_err: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceCurve {
    pub rows: Vec<EvalRow>,
}

#[derive(Debug, Clone)]
pub struct AggregateRow {
    pub samples: u64,
    pub median: f64,
    pub q25: f64,
    pub q75: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub runs: Vec<ConvergenceCurve>,
    pub aggregate: Vec<AggregateRow>,
    pub files: Vec<PathBuf>,
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn err_to(psi: &[f64], nominal: &[f64]) -> f64 {
    psi.iter()
        .zip(nominal)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// One replica; deterministic in (config, seed).
fn run_replica(cfg: &ExperimentConfig, seed: u64) -> Result<ConvergenceCurve> {
    let task = task_by_name(&cfg.task)?;
    let nominal = task.nominal();
    let evaluator = DivergenceEvaluator::from_config(cfg);
    let mut ledger = BudgetLedger::new();
    let mut rng = Rng::new(seed);

    let mut rows: Vec<EvalRow> = Vec::new();
    match cfg.optimizer {
        OptimizerKind::Bo => {
            let bounds = cfg.search.clone().unwrap_or_else(|| task.bounds());
            let state = BoState::new(bounds)?;
            let ground = TaskSampler::nominal(task.as_ref());
            let budget = cfg.budget;
            let mut objective =
                |psi: &[f64], ledger: &mut BudgetLedger, rng: &mut Rng| -> Result<f64> {
                    let p = BudgetedSampler {
                        inner: &ground,
                        cap: budget,
                    };
                    let gen = TaskSampler::new(task.as_ref(), psi.to_vec());
                    let q = BudgetedSampler {
                        inner: &gen,
                        cap: budget,
                    };
                    Ok(evaluator.evaluate_degrading(&p, &q, ledger, rng)?.value)
                };
            let history = bo_run(&mut objective, &state, cfg.bo_iters, &mut ledger, &mut rng)?;
            let mut best = f64::INFINITY;
            for (i, rec) in history.iter().enumerate() {
                best = best.min(err_to(&rec.psi, &nominal));
                rows.push(EvalRow {
                    index: i,
                    psi: rec.psi.clone(),
                    value: rec.value,
                    cumulative_samples: rec.cumulative_samples,
                    best_err: best,
                });
            }
        }
        OptimizerKind::Avo => {
            let init_mean = cfg
                .avo_init
                .clone()
                .unwrap_or_else(|| vec![0.75; task.param_dim()]);
            if init_mean.len() != task.param_dim() {
                return Err(Error::Config(format!(
                    "optimizer.init has {} entries, task needs {}",
                    init_mean.len(),
                    task.param_dim()
                )));
            }
            let init = SearchDistribution::new(init_mean, cfg.avo_init_std)?;
            let mixture = NnMixtureDivergence {
                task: task.as_ref(),
                evaluator: &evaluator,
                samples_per_draw: cfg.avo_samples_per_draw,
                budget: cfg.budget,
            };
            let avo_cfg = AvoConfig {
                k_draws: cfg.avo_k_draws,
                adam_lr: cfg.avo_adam_lr,
                max_steps: usize::MAX >> 1,
                bounds: cfg.search.clone().unwrap_or_else(|| task.bounds()),
            };
            let traj = avo_run(&mixture, init, &avo_cfg, &mut ledger, &mut rng)?;
            let mut best = f64::INFINITY;
            for rec in traj {
                best = best.min(err_to(&rec.mean, &nominal));
                rows.push(EvalRow {
                    index: rec.step,
                    psi: rec.mean.clone(),
                    value: rec.value,
                    cumulative_samples: rec.cumulative_samples,
                    best_err: best,
                });
            }
        }
    }
    Ok(ConvergenceCurve { rows })
}

/// Step interpolation, right-continuous, no lookahead: the best value at
/// `s` is the last row with cumulative samples <= s.
fn step_value(rows: &[EvalRow], s: u64) -> Option<f64> {
    let mut out = None;
    for r in rows {
        if r.cumulative_samples <= s {
            out = Some(r.best_err);
        } else {
            break;
        }
    }
    out
}

/// Type-7 quantile (linear interpolation between order statistics).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    let w = h - lo as f64;
    sorted[lo] * (1.0 - w) + sorted[hi] * w
}

/// Aggregate the runs onto the union of their sample positions, starting at
/// the first point where every run has an evaluation.
pub fn aggregate_runs(runs: &[ConvergenceCurve]) -> Vec<AggregateRow> {
    let mut grid: Vec<u64> = runs
        .iter()
        .flat_map(|r| r.rows.iter().map(|row| row.cumulative_samples))
        .collect();
    grid.sort_unstable();
    grid.dedup();
    let start = runs
        .iter()
        .filter_map(|r| r.rows.first().map(|row| row.cumulative_samples))
        .max()
        .unwrap_or(0);
    let mut out = Vec::new();
    for &s in grid.iter().filter(|&&s| s >= start) {
        let mut vals: Vec<f64> = runs.iter().filter_map(|r| step_value(&r.rows, s)).collect();
        if vals.len() != runs.len() {
            continue;
        }
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push(AggregateRow {
            samples: s,
            median: quantile(&vals, 0.5),
            q25: quantile(&vals, 0.25),
            q75: quantile(&vals, 0.75),
        });
    }
    out
}

pub fn config_header(cfg: &ExperimentConfig) -> String {
    let mut h = String::new();
    for (k, v) in &cfg.raw {
        h.push_str(&format!("# {k} = {v}\n"));
    }
    h.push_str("# note: every generator draw counts toward the budget, including validation draws\n");
    h
}

fn write_run_csv(
    path: &Path,
    header: &str,
    curve: &ConvergenceCurve,
    param_dim: usize,
) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(header.as_bytes())?;
    let psi_cols: Vec<String> = (0..param_dim).map(|i| format!("psi_{i}")).collect();
    writeln!(
        f,
        "evaluation,cumulative_samples,divergence,best_abs_err,{}",
        psi_cols.join(",")
    )?;
    for r in &curve.rows {
        let psis: Vec<String> = r.psi.iter().map(|&v| fmt_f64(v)).collect();
        writeln!(
            f,
            "{},{},{},{},{}",
            r.index,
            r.cumulative_samples,
            fmt_f64(r.value),
            fmt_f64(r.best_err),
            psis.join(",")
        )?;
    }
    Ok(())
}

fn write_aggregate_csv(path: &Path, header: &str, rows: &[AggregateRow]) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(header.as_bytes())?;
    writeln!(f, "cumulative_samples,median,q25,q75")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{}",
            r.samples,
            fmt_f64(r.median),
            fmt_f64(r.q25),
            fmt_f64(r.q75)
        )?;
    }
    Ok(())
}

/// Run every replica (seed = base + index) on the worker pool, aggregate, and
/// write per-run plus aggregate CSVs under the config's output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate_run()?;
    let results: Vec<Result<ConvergenceCurve>> = (0..cfg.repeats)
        .into_par_iter()
        .map(|i| run_replica(cfg, cfg.seed + i as u64))
        .collect();
    let mut runs = Vec::with_capacity(cfg.repeats);
    for r in results {
        runs.push(r?);
    }
    let aggregate = aggregate_runs(&runs);

    fs::create_dir_all(&cfg.out_dir)?;
    let header = config_header(cfg);
    let task = task_by_name(&cfg.task)?;
    let mut files = Vec::new();
    for (i, curve) in runs.iter().enumerate() {
        let path = cfg.out_dir.join(format!("run_{i:02}.csv"));
        write_run_csv(&path, &header, curve, task.param_dim())?;
        files.push(path);
    }
    let agg_path = cfg.out_dir.join("aggregate.csv");
    write_aggregate_csv(&agg_path, &header, &aggregate)?;
    files.push(agg_path);

    Ok(ExperimentOutput {
        runs,
        aggregate,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: usize, s: u64, e: f64) -> EvalRow {
        EvalRow {
            index: i,
            psi: vec![0.0],
            value: 0.0,
            cumulative_samples: s,
            best_err: e,
        }
    }

    #[test]
    fn step_interpolation_holds_last_value() {
        let rows = vec![row(0, 10, 0.5), row(1, 30, 0.2)];
        assert_eq!(step_value(&rows, 5), None);
        assert_eq!(step_value(&rows, 10), Some(0.5));
        assert_eq!(step_value(&rows, 29), Some(0.5));
        assert_eq!(step_value(&rows, 30), Some(0.2));
        assert_eq!(step_value(&rows, 1000), Some(0.2));
    }

    #[test]
    fn aggregate_median_within_quartiles() {
        let runs: Vec<ConvergenceCurve> = (0..5)
            .map(|k| ConvergenceCurve {
                rows: vec![row(0, 10 + k, 1.0 / (k + 1) as f64), row(1, 50, 0.01 * k as f64)],
            })
            .collect();
        let agg = aggregate_runs(&runs);
        assert!(!agg.is_empty());
        for r in &agg {
            assert!(r.q25 <= r.median && r.median <= r.q75);
        }
        // First grid point at the max of first samples.
        assert_eq!(agg[0].samples, 14);
    }

    #[test]
    fn quantile_type7_matches_hand_values() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert!((quantile(&v, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile(&v, 0.25) - 1.75).abs() < 1e-15);
        assert!((quantile(&v, 0.75) - 3.25).abs() < 1e-15);
        assert_eq!(quantile(&[7.0], 0.25), 7.0);
    }

    #[test]
    fn fmt_f64_has_17_significant_digits() {
        let s = fmt_f64(std::f64::consts::PI);
        assert_eq!(s, "3.1415926535897931e0");
        let back: f64 = s.parse().unwrap();
        assert_eq!(back.to_bits(), std::f64::consts::PI.to_bits());
    }
}
