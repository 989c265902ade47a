use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::svg::{line_chart, Series};
use super::{build_graph, build_source, with_workers};
use crate::error::Result;
use crate::optimizer::{run, MetricsRow, RunOutput};

/// Mean and standard deviation across repetitions of one metrics row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummaryRow {
    pub iter: usize,
    pub trajectories: usize,
    pub return_mean: f64,
    pub return_std: f64,
    pub consensus_err_mean: f64,
    pub consensus_err_std: f64,
    pub tracking_err_mean: f64,
    pub tracking_err_std: f64,
    pub gradnorm_mean: f64,
    pub gradnorm_std: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub sigma: f64,
    pub seeds: Vec<u64>,
    pub runs: Vec<RunOutput>,
    pub summary: Vec<SummaryRow>,
    /// Files written, empty for [`execute`].
    pub files: Vec<PathBuf>,
}

impl ExperimentResult {
    /// Mean return over the last `final_window` rows of each repetition.
    pub fn final_window_returns(&self) -> Vec<f64> {
        self.runs
            .iter()
            .map(|r| {
                let rows = &r.metrics.rows;
                let w = self.config.final_window.min(rows.len()).max(1);
                rows[rows.len() - w..].iter().map(|x| x.return_mean).sum::<f64>() / w as f64
            })
            .collect()
    }

    pub fn label(&self) -> String {
        format!("{} ({})", self.config.variant, self.config.graph)
    }

    pub fn series(&self, label: String) -> Series {
        Series {
            label,
            x: self.summary.iter().map(|r| r.trajectories as f64).collect(),
            mean: self.summary.iter().map(|r| r.return_mean).collect(),
            std: self.summary.iter().map(|r| r.return_std).collect(),
        }
    }
}

/// Sample mean and standard deviation (0 for a single value).
fn mean_std(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summarize(runs: &[RunOutput]) -> Vec<SummaryRow> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    (0..first.metrics.rows.len())
        .map(|i| {
            let col = |f: fn(&MetricsRow) -> f64| mean_std(runs.iter().map(move |r| f(&r.metrics.rows[i])));
            let (return_mean, return_std) = col(|r| r.return_mean);
            let (consensus_err_mean, consensus_err_std) = col(|r| r.consensus_err);
            let (tracking_err_mean, tracking_err_std) = col(|r| r.tracking_err);
            let (gradnorm_mean, gradnorm_std) = col(|r| r.gradnorm);
            SummaryRow {
                iter: first.metrics.rows[i].iter,
                trajectories: first.metrics.rows[i].trajectories,
                return_mean,
                return_std,
                consensus_err_mean,
                consensus_err_std,
                tracking_err_mean,
                tracking_err_std,
                gradnorm_mean,
                gradnorm_std,
            }
        })
        .collect()
}

/// Runs every repetition (seed = base seed + r) without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let (_, mixing) = build_graph(cfg)?;
    let sigma = mixing.sigma();
    let source = build_source(cfg)?;
    let base = cfg.algo_config()?;
    let seeds: Vec<u64> = (0..cfg.repetitions as u64).map(|r| cfg.seed.wrapping_add(r)).collect();
    let runs = with_workers(cfg.workers, || {
        seeds
            .par_iter()
            .map(|&seed| {
                let algo = crate::optimizer::AlgoConfig { seed, ..base.clone() };
                run(&algo, mixing.clone(), source.as_ref())
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let summary = summarize(&runs);
    Ok(ExperimentResult { config: cfg.clone(), sigma, seeds, runs, summary, files: Vec::new() })
}

/// Tracks files written so a failed run can remove its partial output.
pub(crate) struct OutputGuard {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl OutputGuard {
    pub(crate) fn new(dir: &Path) -> Result<Self> {
        let created_dir = !dir.exists();
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), created_dir, files: Vec::new(), committed: false })
    }

    pub(crate) fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.files.push(p.clone());
        p
    }

    pub(crate) fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let p = self.path(name);
        fs::write(p, contents)?;
        Ok(())
    }

    pub(crate) fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let mut w = csv::Writer::from_path(self.path(name))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub(crate) fn commit(mut self) -> Vec<PathBuf> {
        self.committed = true;
        std::mem::take(&mut self.files)
    }
}

impl Drop for OutputGuard {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_dir {
            let _ = fs::remove_dir(&self.dir);
        }
    }
}

/// Runs the experiment and writes `config.txt`, `metrics_<r>.csv`, `summary.csv` and
/// `curves.svg` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut guard = OutputGuard::new(&cfg.out_dir)?;
    guard.write("config.txt", &cfg.to_text())?;
    let mut result = execute(cfg)?;
    write_outputs(&mut guard, &result)?;
    result.files = guard.commit();
    Ok(result)
}

fn write_outputs(guard: &mut OutputGuard, result: &ExperimentResult) -> Result<()> {
    for (r, run) in result.runs.iter().enumerate() {
        guard.csv(&format!("metrics_{r}.csv"), &run.metrics.rows)?;
    }
    guard.csv("summary.csv", &result.summary)?;
    let title = format!("{} on {} graph, {} repetitions", result.config.variant, result.config.graph, result.runs.len());
    let svg = line_chart(&title, "trajectories per agent", "average global return", &[result.series(result.label())]);
    guard.write("curves.svg", &svg)
}
