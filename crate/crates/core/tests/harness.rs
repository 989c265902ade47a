use std::fs;

use dgtpg::harness::{compare, execute, run_experiment, ExperimentConfig};
use dgtpg::optimizer::Variant;
use dgtpg::{Error, TopologyKind};

const BASE: &str = "env = tabular\nagents = 4\ngraph = ring\nbatch_M = 6\nminibatch_B = 3\nepochs_S = 3\n\
                    epoch_len_K = 2\nalpha = 0.2\nrepetitions = 3\neval_rollouts = 4\nfinal_window = 3\n";

fn cfg(extra: &str) -> ExperimentConfig {
    ExperimentConfig::parse(&format!("{BASE}{extra}")).unwrap()
}

#[test]
fn config_round_trips_through_text() {
    let c = cfg("variant = dgt_gpomdp\niterations = 7\nadam = true\nseed = 9\n");
    let back = ExperimentConfig::parse(&c.to_text()).unwrap();
    // the echo names the effective policy
    assert_eq!(back, ExperimentConfig { policy: Some(c.policy_kind()), ..c.clone() });
    assert_eq!(back.to_text(), c.to_text());
}

#[test]
fn run_writes_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let c = ExperimentConfig { out_dir: dir.path().join("run"), ..cfg("") };
    let res = run_experiment(&c).unwrap();
    for f in ["config.txt", "metrics_0.csv", "metrics_1.csv", "metrics_2.csv", "summary.csv", "curves.svg"] {
        assert!(c.out_dir.join(f).is_file(), "{f}");
    }
    assert_eq!(res.files.len(), 6);
    assert_eq!(res.seeds, vec![c.seed, c.seed + 1, c.seed + 2]);
    let summary = fs::read_to_string(c.out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3 * 2 + 1);
    assert!(fs::read_to_string(c.out_dir.join("curves.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn single_repetition_summary_equals_the_run() {
    let res = execute(&cfg("repetitions = 1\n")).unwrap();
    let rows = &res.runs[0].metrics.rows;
    assert_eq!(res.summary.len(), rows.len());
    for (s, r) in res.summary.iter().zip(rows) {
        assert_eq!(s.iter, r.iter);
        assert_eq!(s.return_mean, r.return_mean);
        assert_eq!(s.consensus_err_mean, r.consensus_err);
        assert_eq!(s.gradnorm_mean, r.gradnorm);
        assert_eq!((s.return_std, s.consensus_err_std), (0.0, 0.0));
    }
}

#[test]
fn repetitions_are_seeded_and_reproducible() {
    let a = execute(&cfg("")).unwrap();
    let b = execute(&cfg("workers = 2\n")).unwrap();
    for (x, y) in a.runs.iter().zip(&b.runs) {
        assert_eq!(x.metrics, y.metrics);
    }
    assert_ne!(a.runs[0].metrics, a.runs[1].metrics);
    assert_eq!(a.final_window_returns().len(), 3);
}

#[test]
fn failed_run_leaves_no_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("broken");
    let c = ExperimentConfig {
        out_dir: out.clone(),
        tabular_file: Some(dir.path().join("missing.json")),
        ..cfg("")
    };
    assert!(run_experiment(&c).is_err());
    assert!(!out.exists());

    // an existing directory survives, but nothing is left inside it
    fs::create_dir(&out).unwrap();
    assert!(run_experiment(&c).is_err());
    assert_eq!(fs::read_dir(&out).unwrap().count(), 0);
}

#[test]
fn compare_orders_graphs_and_counts_wins() {
    let dir = tempfile::tempdir().unwrap();
    let cfgs: Vec<_> = ["complete", "ring", "star"].iter().map(|g| cfg(&format!("graph = {g}\n"))).collect();
    let report = compare(&cfgs, dir.path()).unwrap();
    let sigma = |k| report.entries[report.find(Variant::DgtSvrpg, k).unwrap()].sigma;
    assert!(sigma(TopologyKind::Complete) < sigma(TopologyKind::Ring));
    assert!(sigma(TopologyKind::Ring) < sigma(TopologyKind::Star) + 1e-12);
    let wins: usize = report.entries.iter().map(|e| e.wins).sum();
    assert_eq!(wins, 3);
    for f in ["compare.csv", "compare_summary.csv", "compare.svg"] {
        assert!(dir.path().join(f).is_file());
    }
}

#[test]
fn identical_variants_tie_and_duplicate_labels_are_disambiguated() {
    let dir = tempfile::tempdir().unwrap();
    let report = compare(&[cfg(""), cfg("")], dir.path()).unwrap();
    assert_eq!(report.entries[0].finals, report.entries[1].finals);
    assert_eq!(report.pairwise_wins(0, 1), 3);
    assert_eq!(report.entries[0].wins, 3);
    assert_ne!(report.entries[0].label, report.entries[1].label);
}

#[test]
fn compare_rejects_configs_differing_beyond_variant_and_graph() {
    let dir = tempfile::tempdir().unwrap();
    let err = compare(&[cfg(""), cfg("alpha = 0.3\n")], dir.path()).unwrap_err();
    assert!(matches!(err, Error::Incomparable(_)), "{err}");
}
