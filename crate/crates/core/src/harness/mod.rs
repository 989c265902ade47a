//! Experiment harness: configs, seeded repetitions, CSV/SVG output, comparisons,
//! bound reports and the exact-gradient cross-check.

pub mod compare;
pub mod config;
pub mod experiment;
pub mod report;
pub mod svg;

use std::fs;

use crate::env::{MountainCar, TabularMdp};
use crate::error::{Error, Result};
use crate::estimator::EstimatorSettings;
use crate::graph::{build_topology, metropolis_weights, MixingMatrix, Topology};
use crate::optimizer::{ExactSource, GradientSource, SampledSource};
use crate::policy::{GaussianPolicy, TabularSoftmaxPolicy};

pub use compare::{compare, CompareEntry, CompareReport};
pub use config::{ConstantsFile, EnvKind, ExperimentConfig, PolicyKind};
pub use experiment::{execute, run_experiment, ExperimentResult, SummaryRow};
pub use report::{bounds_csv, bounds_report, bounds_text, oracle_check, OracleCheck};

/// Default tabular horizon and discount when neither the file nor the config sets them.
const TABULAR_DEFAULT_HORIZON: usize = 3;
const TABULAR_DEFAULT_GAMMA: f64 = 0.9;

/// A gradient source usable from the worker pool.
pub type DynSource = Box<dyn GradientSource + Send + Sync>;

pub fn build_graph(cfg: &ExperimentConfig) -> Result<(Topology, MixingMatrix)> {
    let topo = build_topology(cfg.graph, cfg.agents, cfg.edges.as_deref())?;
    let w = metropolis_weights(&topo)?;
    Ok((topo, w))
}

/// The tabular MDP a config describes, with config-level `gamma`/`horizon` applied.
pub fn load_tabular(cfg: &ExperimentConfig) -> Result<TabularMdp> {
    let mdp = match &cfg.tabular_file {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            TabularMdp::from_json(&text, TABULAR_DEFAULT_GAMMA, TABULAR_DEFAULT_HORIZON)?
        }
        None => TabularMdp::oracle(cfg.agents),
    };
    if mdp.action_counts().len() != cfg.agents {
        return Err(Error::Shape(format!(
            "tabular MDP has {} agents but the config sets agents = {}",
            mdp.action_counts().len(),
            cfg.agents
        )));
    }
    let gamma = cfg.gamma.unwrap_or(mdp.gamma());
    let horizon = cfg.horizon.unwrap_or(mdp.horizon());
    mdp.with_gamma_horizon(gamma, horizon)
}

/// `(horizon, gamma)` after environment defaults are applied.
pub fn horizon_gamma(cfg: &ExperimentConfig) -> Result<(usize, f64)> {
    match cfg.env {
        EnvKind::MountainCar => Ok((
            cfg.horizon.unwrap_or(config::MOUNTAIN_CAR_HORIZON),
            cfg.gamma.unwrap_or(config::MOUNTAIN_CAR_GAMMA),
        )),
        EnvKind::Tabular => {
            let mdp = load_tabular(cfg)?;
            Ok((mdp.horizon(), mdp.gamma()))
        }
    }
}

/// Environment, policy and estimator bundle for a config.
pub fn build_source(cfg: &ExperimentConfig) -> Result<DynSource> {
    let (horizon, gamma) = horizon_gamma(cfg)?;
    let settings = EstimatorSettings { gamma, baseline: cfg.baseline_b, log_cap: cfg.iw_log_cap };
    match cfg.env {
        EnvKind::MountainCar => {
            let env = match &cfg.goal_positions {
                Some(g) => MountainCar::with_goals(g.clone())?,
                None => MountainCar::new(cfg.agents),
            };
            let input = 2 * cfg.agents;
            let policy = match cfg.policy_kind() {
                PolicyKind::GaussianLinear => GaussianPolicy::linear(cfg.agents, input, cfg.policy_sigma),
                _ => GaussianPolicy::mlp(cfg.agents, input, cfg.hidden, cfg.policy_sigma),
            };
            Ok(Box::new(SampledSource::new(env, policy, settings, horizon, cfg.eval_rollouts)))
        }
        EnvKind::Tabular => {
            let mdp = load_tabular(cfg)?;
            if cfg.exact_gradients {
                mdp.check_enumerable(horizon)?;
                return Ok(Box::new(ExactSource::new(mdp)));
            }
            let policy = TabularSoftmaxPolicy::for_mdp(&mdp);
            let enumerable = mdp.check_enumerable(horizon).is_ok();
            let exact = ExactSource::new(mdp.clone());
            let source = SampledSource::new(mdp, policy, settings, horizon, cfg.eval_rollouts);
            if enumerable {
                Ok(Box::new(source.with_gradnorm_oracle(Box::new(move |theta| exact.gradnorm_sq(theta)))))
            } else {
                Ok(Box::new(source))
            }
        }
    }
}

/// Runs `f` on a pool with `workers` threads (0 = all cores).
pub fn with_workers<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(f))
}
