use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use adtune::budget::BudgetLedger;
use adtune::error::{Error, Result};
use adtune::harness::experiment::{config_header, fmt_f64};
use adtune::harness::{
    compare as run_compare, run_experiment, run_selftest, write_compare_csv, DivergenceEvaluator,
    ExperimentConfig,
};
use adtune::rng::Rng;
use adtune::sim::{task_by_name, TaskSampler};

#[derive(Parser)]
#[command(
    name = "adtune",
    about = "Tune black-box generators by divergence minimization with sample-budget accounting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Clone)]
struct Overrides {
    /// Base seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Repeats override.
    #[arg(long)]
    repeats: Option<usize>,
    /// Generator-sample budget override.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate one divergence value between the configured task at
    /// estimate.psi and its ground truth.
    Estimate {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one experiment config: repeated budgeted optimization runs.
    Optimize {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run two configs on the same task/budget and report median best-error
    /// ratios at matched budgets.
    Compare {
        config_a: PathBuf,
        config_b: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run the built-in invariant suite.
    Selftest {
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

fn load_config(path: &PathBuf, ov: &Overrides) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path)?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = ov.seed {
        cfg.seed = s;
        cfg.raw.push(("override.seed".into(), s.to_string()));
    }
    if let Some(out) = &ov.out {
        cfg.out_dir = out.clone();
        cfg.raw
            .push(("override.out".into(), out.display().to_string()));
    }
    if let Some(r) = ov.repeats {
        cfg.repeats = r;
        cfg.raw.push(("override.repeats".into(), r.to_string()));
    }
    if let Some(b) = ov.budget {
        cfg.budget = b;
        cfg.raw.push(("override.budget".into(), b.to_string()));
    }
    Ok(cfg)
}

fn cmd_estimate(cfg: &ExperimentConfig) -> Result<()> {
    let task = task_by_name(&cfg.task)?;
    let psi = cfg
        .estimate_psi
        .clone()
        .ok_or_else(|| Error::Config("estimate.psi is required for `estimate`".into()))?;
    let evaluator = DivergenceEvaluator::from_config(cfg);
    let mut ledger = BudgetLedger::new();
    let mut rng = Rng::new(cfg.seed);
    let ground = TaskSampler::nominal(task.as_ref());
    let gen = TaskSampler::new(task.as_ref(), psi.clone());

    let (estimate, probes, n) = match cfg.estimate_n {
        Some(n) => {
            let e = evaluator.evaluate_at(n, &ground, &gen, &mut ledger, &mut rng)?;
            (e, Vec::new(), n)
        }
        None => {
            let s = evaluator.evaluate(&ground, &gen, &mut ledger, &mut rng)?;
            (s.estimate, s.probes, s.n)
        }
    };

    println!("task            {}", cfg.task);
    println!("divergence      {}", cfg.divergence.as_str());
    println!("psi             {psi:?}");
    println!("value           {}", fmt_f64(estimate.value));
    println!("alpha_used      {}", fmt_f64(estimate.alpha_used));
    println!("train_loss      {}", fmt_f64(estimate.train_loss));
    println!("valid_loss      {}", fmt_f64(estimate.valid_loss));
    println!("train_size      {n}");
    println!("samples_total   {}", ledger.total());

    if let Some(out) = non_default_out(cfg) {
        fs::create_dir_all(&out)?;
        let header = config_header(cfg);
        let mut f = fs::File::create(out.join("probes.csv"))?;
        f.write_all(header.as_bytes())?;
        writeln!(f, "alpha,n,train_loss,valid_loss")?;
        for p in &probes {
            writeln!(
                f,
                "{},{},{},{}",
                fmt_f64(p.alpha),
                p.n,
                fmt_f64(p.train_loss),
                fmt_f64(p.valid_loss)
            )?;
        }
        let artifacts = evaluator.artifacts_at(n, &ground, &gen, &mut ledger, &mut rng)?;
        if !artifacts.trajectory.is_empty() {
            let mut f = fs::File::create(out.join("trajectory.csv"))?;
            f.write_all(header.as_bytes())?;
            writeln!(f, "iteration,train_loss,valid_loss,threshold")?;
            for t in &artifacts.trajectory {
                writeln!(
                    f,
                    "{},{},{},{}",
                    t.i,
                    fmt_f64(t.train_loss),
                    fmt_f64(t.valid_loss),
                    fmt_f64(t.threshold)
                )?;
            }
        }
        if !artifacts.trace.is_empty() {
            let mut f = fs::File::create(out.join("trace.csv"))?;
            f.write_all(header.as_bytes())?;
            writeln!(f, "step,batch_loss,l_acc,zeta")?;
            for t in &artifacts.trace {
                writeln!(
                    f,
                    "{},{},{},{}",
                    t.step,
                    fmt_f64(t.batch_loss),
                    fmt_f64(t.l_acc),
                    fmt_f64(t.zeta)
                )?;
            }
        }
        println!("artifacts       {}", out.display());
    }
    Ok(())
}

/// `estimate` only writes artifacts when an output directory was configured
/// or passed explicitly.
fn non_default_out(cfg: &ExperimentConfig) -> Option<PathBuf> {
    let has_out = cfg
        .raw
        .iter()
        .any(|(k, _)| k == "run.out" || k == "override.out");
    has_out.then(|| cfg.out_dir.clone())
}

fn cmd_optimize(cfg: &ExperimentConfig) -> Result<()> {
    let out = run_experiment(cfg)?;
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    if let Some(last) = out.aggregate.last() {
        println!(
            "final median |psi - psi*| = {} at {} samples ({} runs)",
            fmt_f64(last.median),
            last.samples,
            out.runs.len()
        );
    }
    Ok(())
}

fn cmd_compare(
    cfg_a: &ExperimentConfig,
    cfg_b: &ExperimentConfig,
    out: Option<PathBuf>,
) -> Result<()> {
    let rows = run_compare(cfg_a, cfg_b)?;
    let dir = out.unwrap_or_else(|| cfg_a.out_dir.clone());
    fs::create_dir_all(&dir)?;
    let path = dir.join("compare.csv");
    write_compare_csv(&path, cfg_a, cfg_b, &rows)?;
    println!("wrote {}", path.display());
    if let Some(last) = rows.last() {
        println!(
            "at {} samples: median A = {}, median B = {}, ratio = {}",
            last.samples,
            fmt_f64(last.median_a),
            fmt_f64(last.median_b),
            fmt_f64(last.ratio)
        );
    }
    Ok(())
}

fn run() -> Result<i32> {
    let cli = Cli::parse();
    match cli.command {
        Command::Estimate { config, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            cmd_estimate(&cfg)?;
            Ok(0)
        }
        Command::Optimize { config, overrides } => {
            let cfg = load_config(&config, &overrides)?;
            cmd_optimize(&cfg)?;
            Ok(0)
        }
        Command::Compare {
            config_a,
            config_b,
            overrides,
        } => {
            let cfg_a = load_config(&config_a, &overrides)?;
            let cfg_b = load_config(&config_b, &overrides)?;
            cmd_compare(&cfg_a, &cfg_b, overrides.out.clone())?;
            Ok(0)
        }
        Command::Selftest { seed } => {
            let failures = run_selftest(seed);
            Ok(if failures == 0 { 0 } else { 1 })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(0) => ExitCode::SUCCESS,
        Ok(_) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
