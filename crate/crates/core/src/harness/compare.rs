use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::ExperimentConfig;
use super::experiment::{run_experiment, ExperimentResult, OutputGuard};
use super::svg::line_chart;
use crate::error::{Error, Result};
use crate::graph::TopologyKind;
use crate::optimizer::Variant;

#[derive(Debug, Clone)]
pub struct CompareEntry {
    pub label: String,
    pub variant: Variant,
    pub graph: TopologyKind,
    pub sigma: f64,
    /// Final-window mean return per seed.
    pub finals: Vec<f64>,
    /// Seeds on which this entry had the best final-window return (ties go to the
    /// earlier entry).
    pub wins: usize,
    pub result: ExperimentResult,
}

#[derive(Debug, Clone)]
pub struct CompareReport {
    pub seeds: Vec<u64>,
    pub entries: Vec<CompareEntry>,
    pub files: Vec<PathBuf>,
}

impl CompareReport {
    /// Seeds on which entry `a`'s final-window return is at least entry `b`'s.
    pub fn pairwise_wins(&self, a: usize, b: usize) -> usize {
        let (ea, eb) = (&self.entries[a], &self.entries[b]);
        ea.finals.iter().zip(&eb.finals).filter(|(x, y)| x >= y).count()
    }

    pub fn find(&self, variant: Variant, graph: TopologyKind) -> Option<usize> {
        self.entries.iter().position(|e| e.variant == variant && e.graph == graph)
    }
}

#[derive(Serialize)]
struct SummaryLine<'a> {
    label: &'a str,
    variant: String,
    graph: String,
    sigma: f64,
    final_mean: f64,
    final_std: f64,
    wins: usize,
}

/// Everything except variant, graph and the output directory must agree.
fn check_comparable(configs: &[ExperimentConfig]) -> Result<()> {
    let norm = |c: &ExperimentConfig| ExperimentConfig {
        variant: Variant::DgtSvrpg,
        graph: TopologyKind::Ring,
        edges: None,
        out_dir: PathBuf::new(),
        ..c.clone()
    };
    let Some(first) = configs.first() else {
        return Err(Error::Incomparable("no configs given".into()));
    };
    let reference = norm(first);
    for (i, c) in configs.iter().enumerate().skip(1) {
        if norm(c) != reference {
            return Err(Error::Incomparable(format!(
                "config {} differs from config 0 in more than variant/graph",
                i
            )));
        }
    }
    Ok(())
}

fn labels(configs: &[ExperimentConfig]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for c in configs {
        let base = format!("{}_{}", c.variant, c.graph);
        let mut label = base.clone();
        let mut k = 2;
        while out.contains(&label) {
            label = format!("{base}_{k}");
            k += 1;
        }
        out.push(label);
    }
    out
}

/// Runs every config into `out_dir/<label>/` and writes `compare.csv` (final-window
/// return per seed), `compare_summary.csv` (per-entry mean, std, wins and σ) and
/// `compare.svg`.
pub fn compare(configs: &[ExperimentConfig], out_dir: &Path) -> Result<CompareReport> {
    check_comparable(configs)?;
    let mut guard = OutputGuard::new(out_dir)?;
    let labels = labels(configs);
    let mut entries = Vec::with_capacity(configs.len());
    for (cfg, label) in configs.iter().zip(&labels) {
        let sub = ExperimentConfig { out_dir: out_dir.join(label), ..cfg.clone() };
        let result = run_experiment(&sub)?;
        entries.push(CompareEntry {
            label: label.clone(),
            variant: cfg.variant,
            graph: cfg.graph,
            sigma: result.sigma,
            finals: result.final_window_returns(),
            wins: 0,
            result,
        });
    }
    let seeds = entries[0].result.seeds.clone();
    for s in 0..seeds.len() {
        let best = (0..entries.len())
            .fold(0, |b, i| if entries[i].finals[s] > entries[b].finals[s] { i } else { b });
        entries[best].wins += 1;
    }

    let mut w = csv::Writer::from_path(guard.path("compare.csv"))?;
    let mut header = vec!["seed".to_string()];
    header.extend(labels.iter().cloned());
    w.write_record(&header)?;
    for (s, seed) in seeds.iter().enumerate() {
        let mut rec = vec![seed.to_string()];
        rec.extend(entries.iter().map(|e| e.finals[s].to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;

    let lines: Vec<SummaryLine> = entries
        .iter()
        .map(|e| {
            let n = e.finals.len() as f64;
            let mean = e.finals.iter().sum::<f64>() / n;
            let var = if n > 1.0 { e.finals.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            SummaryLine {
                label: &e.label,
                variant: e.variant.to_string(),
                graph: e.graph.to_string(),
                sigma: e.sigma,
                final_mean: mean,
                final_std: var.sqrt(),
                wins: e.wins,
            }
        })
        .collect();
    guard.csv("compare_summary.csv", &lines)?;
    let series: Vec<_> = entries.iter().map(|e| e.result.series(e.label.clone())).collect();
    guard.write("compare.svg", &line_chart("comparison", "trajectories per agent", "average global return", &series))?;
    let mut files = guard.commit();
    for e in &entries {
        files.extend(e.result.files.iter().cloned());
    }
    Ok(CompareReport { seeds, entries, files })
}
