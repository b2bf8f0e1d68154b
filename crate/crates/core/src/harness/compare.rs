//! Side-by-side comparison of two experiment configs on the same task and
//! budget: median best-error at matched sample positions plus their ratio.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::experiment::{fmt_f64, run_experiment, AggregateRow};

#[derive(Debug, Clone)]
pub struct CompareRow {
    pub samples: u64,
    pub median_a: f64,
    pub median_b: f64,
    /// median_a / median_b.
    pub ratio: f64,
}

fn step_median(agg: &[AggregateRow], s: u64) -> Option<f64> {
    let mut out = None;
    for r in agg {
        if r.samples <= s {
            out = Some(r.median);
        } else {
            break;
        }
    }
    out
}

/// Match two aggregates on the union of their grids restricted to the range
/// both cover.
pub fn match_aggregates(a: &[AggregateRow], b: &[AggregateRow]) -> Result<Vec<CompareRow>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::NoCommonGrid);
    }
    let lo = a[0].samples.max(b[0].samples);
    let hi = a.last().unwrap().samples.min(b.last().unwrap().samples);
    if lo > hi {
        return Err(Error::NoCommonGrid);
    }
    let mut grid: Vec<u64> = a
        .iter()
        .map(|r| r.samples)
        .chain(b.iter().map(|r| r.samples))
        .filter(|&s| s >= lo && s <= hi)
        .collect();
    grid.sort_unstable();
    grid.dedup();
    let mut rows = Vec::with_capacity(grid.len());
    for s in grid {
        let (ma, mb) = match (step_median(a, s), step_median(b, s)) {
            (Some(x), Some(y)) => (x, y),
            _ => continue,
        };
        rows.push(CompareRow {
            samples: s,
            median_a: ma,
            median_b: mb,
            ratio: ma / mb,
        });
    }
    if rows.is_empty() {
        return Err(Error::NoCommonGrid);
    }
    Ok(rows)
}

/// Run both experiments and produce the matched-budget report. Fails when the
/// configs disagree on task or budget.
pub fn compare(cfg_a: &ExperimentConfig, cfg_b: &ExperimentConfig) -> Result<Vec<CompareRow>> {
    if cfg_a.task != cfg_b.task {
        return Err(Error::Config(format!(
            "mismatched tasks: '{}' vs '{}'",
            cfg_a.task, cfg_b.task
        )));
    }
    if cfg_a.budget != cfg_b.budget {
        return Err(Error::Config(format!(
            "mismatched budgets: {} vs {}",
            cfg_a.budget, cfg_b.budget
        )));
    }
    let out_a = run_experiment(cfg_a)?;
    let out_b = run_experiment(cfg_b)?;
    match_aggregates(&out_a.aggregate, &out_b.aggregate)
}

pub fn write_compare_csv(
    path: &Path,
    cfg_a: &ExperimentConfig,
    cfg_b: &ExperimentConfig,
    rows: &[CompareRow],
) -> Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "# A = {}", cfg_a.divergence.as_str())?;
    for (k, v) in &cfg_a.raw {
        writeln!(f, "# a.{k} = {v}")?;
    }
    writeln!(f, "# B = {}", cfg_b.divergence.as_str())?;
    for (k, v) in &cfg_b.raw {
        writeln!(f, "# b.{k} = {v}")?;
    }
    writeln!(f, "cumulative_samples,median_a,median_b,ratio")?;
    for r in rows {
        writeln!(
            f,
            "{},{},{},{}",
            r.samples,
            fmt_f64(r.median_a),
            fmt_f64(r.median_b),
            fmt_f64(r.ratio)
        )?;
    }
    Ok(())
}
