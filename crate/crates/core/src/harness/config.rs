//! Flat key-value experiment configs with dotted sections.
//!
//! ```text
//! task.name = xor
//! task.search = -1.5708 1.5708
//! divergence.kind = ad-linear
//! optimizer.kind = bo
//! run.budget = 200000
//! run.repeats = 20
//! run.seed = 7
//! run.out = out/xor-ad-linear
//! ```
//!
//! Lines starting with `#` are comments. Every parsed pair is kept verbatim
//! so output files can embed the full config as provenance.

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::capacity::CapacityFunction;
use crate::divergence::{GapCriterion, GrowthPolicy};
use crate::error::{Error, Result};
use crate::gbdt::GbdtConfig;
use crate::nn::NnConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceKind {
    Jsd,
    AdLinear,
    AdLog,
    AdDropout,
    AdL2,
}

impl DivergenceKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "jsd" => Ok(Self::Jsd),
            "ad-linear" => Ok(Self::AdLinear),
            "ad-log" => Ok(Self::AdLog),
            "ad-dropout" => Ok(Self::AdDropout),
            "ad-l2" => Ok(Self::AdL2),
            other => Err(Error::Config(format!("unknown divergence kind '{other}'"))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Jsd => "jsd",
            Self::AdLinear => "ad-linear",
            Self::AdLog => "ad-log",
            Self::AdDropout => "ad-dropout",
            Self::AdL2 => "ad-l2",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Gbdt,
    Nn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Bo,
    Avo,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub task: String,
    /// Search box for the optimizer; defaults to the task bounds.
    pub search: Option<Vec<(f64, f64)>>,
    pub divergence: DivergenceKind,
    pub backend: Backend,
    pub gbdt: GbdtConfig,
    pub nn: NnConfig,
    pub crit: GapCriterion,
    pub optimizer: OptimizerKind,
    /// Cap on BO proposal rounds (budget usually terminates first).
    pub bo_iters: usize,
    pub avo_k_draws: usize,
    pub avo_adam_lr: f64,
    pub avo_init: Option<Vec<f64>>,
    pub avo_init_std: f64,
    /// Per-parameter-draw training rows for one mixture estimate; the
    /// validation side matches.
    pub avo_samples_per_draw: usize,
    pub budget: u64,
    pub repeats: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub estimate_psi: Option<Vec<f64>>,
    /// Fixed per-class sample size for `estimate`; when absent the gap
    /// criterion picks the size.
    pub estimate_n: Option<usize>,
    /// Every parsed key-value pair, for provenance headers.
    pub raw: Vec<(String, String)>,
}

fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!("line {}: expected 'key = value'", lineno + 1))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

struct Lookup {
    map: BTreeMap<String, String>,
}

impl Lookup {
    fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(|s| s.as_str())
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(s) => s
                .parse()
                .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{s}'"))),
        }
    }

    fn floats(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(s) => {
                let vals: std::result::Result<Vec<f64>, _> =
                    s.split_whitespace().map(|t| t.parse()).collect();
                vals.map(Some)
                    .map_err(|_| Error::Config(format!("key '{key}': cannot parse '{s}'")))
            }
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let raw = parse_pairs(text)?;
        let mut map = BTreeMap::new();
        for (k, v) in &raw {
            if map.insert(k.clone(), v.clone()).is_some() {
                return Err(Error::Config(format!("duplicate key '{k}'")));
            }
        }
        let l = Lookup { map };

        let task = l.required("task.name")?.to_string();
        let divergence = DivergenceKind::parse(l.required("divergence.kind")?)?;
        let optimizer = match l.get("optimizer.kind").unwrap_or("bo") {
            "bo" => OptimizerKind::Bo,
            "avo" => OptimizerKind::Avo,
            other => return Err(Error::Config(format!("unknown optimizer '{other}'"))),
        };

        let backend = match l.get("divergence.backend") {
            Some("gbdt") => Backend::Gbdt,
            Some("nn") => Backend::Nn,
            Some(other) => return Err(Error::Config(format!("unknown backend '{other}'"))),
            None => match (divergence, optimizer) {
                (DivergenceKind::AdDropout | DivergenceKind::AdL2, _) => Backend::Nn,
                (DivergenceKind::AdLinear | DivergenceKind::AdLog, _) => Backend::Gbdt,
                (DivergenceKind::Jsd, OptimizerKind::Bo) => Backend::Gbdt,
                (DivergenceKind::Jsd, OptimizerKind::Avo) => Backend::Nn,
            },
        };

        // Compatibility: tree ensembles have no mixture-discriminator path.
        match (divergence, backend) {
            (DivergenceKind::AdDropout | DivergenceKind::AdL2, Backend::Gbdt) => {
                return Err(Error::Config(
                    "ad-dropout/ad-l2 require the nn backend".into(),
                ));
            }
            (DivergenceKind::AdLinear | DivergenceKind::AdLog, Backend::Nn) => {
                return Err(Error::Config(
                    "ad-linear/ad-log require the gbdt backend".into(),
                ));
            }
            _ => {}
        }
        if optimizer == OptimizerKind::Avo && backend == Backend::Gbdt {
            return Err(Error::Config(
                "avo pairs with the nn backend; gbdt divergences go through bo".into(),
            ));
        }

        let n_trees = l.parse_or("divergence.trees", 100usize)?;
        let c0 = l.parse_or("divergence.c0", 0.25f64)?;
        let capacity = match divergence {
            DivergenceKind::AdLog => CapacityFunction::logarithmic(c0, n_trees)?,
            _ => CapacityFunction::linear(c0, n_trees)?,
        };
        let gbdt = GbdtConfig {
            n_trees,
            max_depth: l.parse_or("divergence.depth", 3usize)?,
            shrinkage: l.parse_or("divergence.shrinkage", 0.1f64)?,
            min_leaf: l.parse_or("divergence.min_leaf", 8usize)?,
            capacity,
        };

        let nn = NnConfig {
            hidden: l.parse_or("divergence.hidden", 32usize)?,
            step_size: l.parse_or("divergence.lr", 1e-2f64)?,
            ema_coeff: l.parse_or("divergence.ema", 0.9f64)?,
            r1_coeff: l.parse_or("divergence.r1", 10.0f64)?,
            batch: l.parse_or("divergence.batch", 64usize)?,
            ema_tol: l.parse_or("divergence.ema_tol", 1e-4f64)?,
            ema_patience: l.parse_or("divergence.ema_patience", 200usize)?,
            max_steps: l.parse_or("divergence.max_steps", 20_000usize)?,
        };

        let default_tol = match backend {
            Backend::Gbdt => 1e-2,
            Backend::Nn => 5e-2,
        };
        let growth = match backend {
            Backend::Gbdt => GrowthPolicy::Bisection,
            Backend::Nn => GrowthPolicy::Doubling,
        };
        let crit = GapCriterion::new(
            l.parse_or("divergence.tolerance", default_tol)?,
            l.parse_or("divergence.min_n", 64usize)?,
            l.parse_or("divergence.max_n", 65_536usize)?,
            growth,
        )?;

        let search = l.floats("task.search")?.map(|vals| {
            vals.chunks(2)
                .filter(|c| c.len() == 2)
                .map(|c| (c[0], c[1]))
                .collect::<Vec<_>>()
        });
        if let Some(s) = &search {
            if s.is_empty() || s.iter().any(|(lo, hi)| !(lo < hi)) {
                return Err(Error::Config("task.search needs 'lo hi' pairs".into()));
            }
        }

        Ok(ExperimentConfig {
            task,
            search,
            divergence,
            backend,
            gbdt,
            nn,
            crit,
            optimizer,
            bo_iters: l.parse_or("optimizer.iters", 1000usize)?,
            avo_k_draws: l.parse_or("optimizer.k_draws", 16usize)?,
            avo_adam_lr: l.parse_or("optimizer.adam_lr", 1e-2f64)?,
            avo_init: l.floats("optimizer.init")?,
            avo_init_std: l.parse_or("optimizer.init_std", 0.25f64)?,
            avo_samples_per_draw: l.parse_or("optimizer.samples_per_draw", 32usize)?,
            budget: l.parse_or("run.budget", 100_000u64)?,
            repeats: l.parse_or("run.repeats", 20usize)?,
            seed: l.parse_or("run.seed", 0u64)?,
            out_dir: PathBuf::from(l.get("run.out").unwrap_or("out")),
            estimate_psi: l.floats("estimate.psi")?,
            estimate_n: match l.get("estimate.n") {
                None => None,
                Some(s) => Some(s.parse().map_err(|_| {
                    Error::Config(format!("key 'estimate.n': cannot parse '{s}'"))
                })?),
            },
            raw,
        })
    }

    pub fn validate_run(&self) -> Result<()> {
        if self.repeats == 0 {
            return Err(Error::Config("run.repeats must be >= 1".into()));
        }
        if self.budget == 0 {
            return Err(Error::Config("run.budget must be > 0".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
task.name = xor
divergence.kind = ad-linear
optimizer.kind = bo
run.budget = 1000
run.repeats = 2
run.seed = 5
run.out = /tmp/x
";

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = ExperimentConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.task, "xor");
        assert_eq!(cfg.divergence, DivergenceKind::AdLinear);
        assert_eq!(cfg.backend, Backend::Gbdt);
        assert_eq!(cfg.gbdt.n_trees, 100);
        assert_eq!(cfg.repeats, 2);
        assert!((cfg.crit.tolerance - 1e-2).abs() < 1e-15);
    }

    #[test]
    fn nn_kinds_default_to_nn_backend_and_loose_tolerance() {
        let text = MINIMAL.replace("ad-linear", "ad-dropout");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.backend, Backend::Nn);
        assert!((cfg.crit.tolerance - 5e-2).abs() < 1e-15);
    }

    #[test]
    fn incompatible_combinations_rejected() {
        let bad = MINIMAL.replace("ad-linear", "ad-dropout") + "divergence.backend = gbdt\n";
        assert!(ExperimentConfig::parse(&bad).is_err());
        // avo cannot drive tree-backed divergences.
        let bad2 = MINIMAL.replace("optimizer.kind = bo", "optimizer.kind = avo");
        assert!(ExperimentConfig::parse(&bad2).is_err());
    }

    #[test]
    fn avo_jsd_is_the_constant_r1_nn_baseline() {
        let text = MINIMAL
            .replace("ad-linear", "jsd")
            .replace("optimizer.kind = bo", "optimizer.kind = avo")
            .replace("task.name = xor", "task.name = detector");
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.backend, Backend::Nn);
        assert_eq!(cfg.optimizer, OptimizerKind::Avo);
    }

    #[test]
    fn duplicate_keys_and_garbage_rejected() {
        let dup = MINIMAL.to_string() + "task.name = roll\n";
        assert!(ExperimentConfig::parse(&dup).is_err());
        assert!(ExperimentConfig::parse("task.name xor\n").is_err());
    }

    #[test]
    fn search_box_parses_pairs() {
        let text = MINIMAL.to_string() + "task.search = -1.5 1.5\n";
        let cfg = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(cfg.search, Some(vec![(-1.5, 1.5)]));
    }
}
