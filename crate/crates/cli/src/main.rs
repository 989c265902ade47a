use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dgtpg::harness::{
    bounds_csv, bounds_report, bounds_text, compare, oracle_check, run_experiment, ConstantsFile, ExperimentConfig,
};

/// Decentralized policy gradient experiments.
#[derive(Parser)]
#[command(name = "dgtpg", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration for all its repetitions.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run several configurations that differ only in variant or graph and compare them.
    Compare {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Evaluate the step-size, mini-batch and convergence bounds for a configuration.
    Bounds {
        config: PathBuf,
        constants: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check exact tabular gradients against finite differences of exact returns.
    OracleCheck {
        config: PathBuf,
        /// Number of random parameter points.
        #[arg(long, default_value_t = 5)]
        probes: usize,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Output directory (overrides `out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed (overrides `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of repetitions (overrides `repetitions`).
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads, 0 for all cores (overrides `workers`).
    #[arg(long)]
    workers: Option<usize>,
}

fn load(path: &Path, o: &Overrides) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut cfg = ExperimentConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
    if let Some(out) = &o.out {
        cfg.out_dir = out.clone();
    }
    if let Some(seed) = o.seed {
        cfg.seed = seed;
    }
    if let Some(reps) = o.reps {
        if reps == 0 {
            bail!("--reps must be at least 1");
        }
        cfg.repetitions = reps;
    }
    if let Some(w) = o.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn cmd_run(config: &Path, o: &Overrides) -> Result<()> {
    let cfg = load(config, o)?;
    let result = run_experiment(&cfg)?;
    let last = result.summary.last().context("run produced no metrics")?;
    println!(
        "{} on {} (sigma = {:.4}), {} repetition(s), {} trajectories per agent",
        cfg.variant,
        cfg.graph,
        result.sigma,
        result.runs.len(),
        last.trajectories
    );
    println!(
        "final: return {:.4} ± {:.4}, consensus error {:.3e}, gradnorm {:.3e}",
        last.return_mean, last.return_std, last.consensus_err_mean, last.gradnorm_mean
    );
    println!("wrote {} files to {}", result.files.len(), cfg.out_dir.display());
    Ok(())
}

fn cmd_compare(configs: &[PathBuf], o: &Overrides) -> Result<()> {
    let cfgs = configs.iter().map(|p| load(p, o)).collect::<Result<Vec<_>>>()?;
    let out_dir = cfgs[0].out_dir.clone();
    let report = compare(&cfgs, &out_dir)?;
    println!("{:<28} {:>8} {:>12} {:>12} {:>6}", "label", "sigma", "final mean", "final std", "wins");
    for e in &report.entries {
        let n = e.finals.len() as f64;
        let mean = e.finals.iter().sum::<f64>() / n;
        let std = if n > 1.0 { (e.finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
        println!("{:<28} {:>8.4} {:>12.4} {:>12.4} {:>6}", e.label, e.sigma, mean, std, e.wins);
    }
    println!("wrote comparison to {}", out_dir.display());
    Ok(())
}

fn cmd_bounds(config: &Path, constants: &Path, o: &Overrides) -> Result<()> {
    let cfg = load(config, o)?;
    let text = fs::read_to_string(constants).with_context(|| format!("reading {}", constants.display()))?;
    let consts = ConstantsFile::parse(&text).with_context(|| format!("in {}", constants.display()))?;
    let report = bounds_report(&cfg, &consts)?;
    print!("{}", bounds_text(&report));
    fs::create_dir_all(&cfg.out_dir)?;
    let path = cfg.out_dir.join("bounds.csv");
    fs::write(&path, bounds_csv(&report)?)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_oracle_check(config: &Path, probes: usize, o: &Overrides) -> Result<()> {
    let cfg = load(config, o)?;
    let check = oracle_check(&cfg, probes)?;
    println!(
        "{} probes: max |grad - fd| = {:.3e} (tolerance {:.0e}), max |mass - 1| = {:.3e}",
        check.probes, check.max_fd_gap, check.tolerance, check.max_mass_error
    );
    if !check.passed {
        bail!("oracle check failed");
    }
    println!("oracle check passed");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Run { config, overrides } => cmd_run(config, overrides),
        Command::Compare { configs, overrides } => cmd_compare(configs, overrides),
        Command::Bounds { config, constants, overrides } => cmd_bounds(config, constants, overrides),
        Command::OracleCheck { config, probes, overrides } => cmd_oracle_check(config, *probes, overrides),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
