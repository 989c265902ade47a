use std::fmt::Write as _;

use rand::Rng;

use super::config::{ConstantsFile, EnvKind, ExperimentConfig};
use super::{build_graph, horizon_gamma, load_tabular};
use crate::bounds::{BoundReport, ProblemConstants};
use crate::error::{Error, Result};
use crate::optimizer::{stream_rng, INIT_STREAM};
use crate::oracle;
use crate::policy::{Policy, TabularSoftmaxPolicy};
use crate::trajectory::RewardTarget;

/// Evaluates every bound for the config's graph and schedule with user-supplied
/// problem constants.
pub fn bounds_report(cfg: &ExperimentConfig, c: &ConstantsFile) -> Result<BoundReport> {
    let (topo, mixing) = build_graph(cfg)?;
    let (horizon, gamma) = horizon_gamma(cfg)?;
    let algo = cfg.algo_config()?;
    let pc = ProblemConstants {
        g: c.g,
        f: c.f,
        v: c.v,
        w_var: c.w_var,
        horizon: horizon as f64,
        gamma,
        n: cfg.agents as f64,
        sigma: mixing.sigma(),
        k: algo.epoch_len as f64,
        s: algo.epochs as f64,
        m: algo.batch as f64,
        b: algo.minibatch as f64,
        alpha: cfg.alpha,
        l: c.l,
        l_g: c.l_g,
        c_g: c.c_g,
    };
    Ok(BoundReport::compute(&pc, &topo.degrees(), c.init_consensus, c.init_tracking, c.j_gap))
}

fn flag(ok: bool) -> &'static str {
    if ok {
        "in regime"
    } else {
        "OUT OF REGIME"
    }
}

pub fn bounds_text(r: &BoundReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "C_omega            {:.6e}", r.c_omega);
    let _ = writeln!(s, "Psi                {:.6e}", r.psi);
    let _ = writeln!(s, "lambda             {:.6}  ({})", r.lambda.lambda, flag(r.lambda.in_regime));
    let _ = writeln!(
        s,
        "alpha_max          {:.6e}  (terms {:.6e}, {:.6e}, {:.6e}; binding {:?})",
        r.alpha_max.value, r.alpha_max.terms[0], r.alpha_max.terms[1], r.alpha_max.terms[2], r.alpha_max.binding
    );
    let m = &r.minibatch;
    let _ = writeln!(
        s,
        "B1, B2             {:.6e}, {:.6e}  required B >= {}  ({})",
        m.b1,
        m.b2,
        m.required.map_or("undefined".to_string(), |b| b.to_string()),
        flag(m.in_regime)
    );
    let _ = writeln!(s, "B_tilde            {}", m.b_tilde.map_or("undefined".to_string(), |b| format!("{b:.6e}")));
    let _ = writeln!(s, "G eigenvalues      {:.6}, {:.6}", r.g.lambda1, r.g.lambda2);
    let t = &r.stationarity;
    let _ = writeln!(s, "v1, v2             {:.6e}, {:.6e}", t.v1, t.v2);
    let _ = writeln!(
        s,
        "stationarity bound {:.6e} = {:.6e} + {:.6e} + {:.6e} + {:.6e}  ({})",
        t.total,
        t.optimality_term,
        t.variance_term,
        t.consensus_term,
        t.tracking_term,
        flag(t.in_regime)
    );
    let c = &r.complexity;
    let _ = writeln!(s, "trajectories/agent {}", c.trajectories_per_agent);
    let _ = writeln!(s, "rounds per agent   {:?}", c.rounds_per_agent);
    let _ = writeln!(s, "total messages     {}", c.total_messages);
    s
}

pub fn bounds_csv(r: &BoundReport) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "c_omega", "psi", "lambda", "lambda_in_regime", "alpha_max", "b1", "b2", "b_tilde", "g_lambda1", "g_lambda2",
        "v1", "v2", "bound", "bound_in_regime", "trajectories_per_agent", "total_messages",
    ])?;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    w.write_record([
        r.c_omega.to_string(),
        r.psi.to_string(),
        r.lambda.lambda.to_string(),
        r.lambda.in_regime.to_string(),
        r.alpha_max.value.to_string(),
        r.minibatch.b1.to_string(),
        r.minibatch.b2.to_string(),
        opt(r.minibatch.b_tilde),
        r.g.lambda1.to_string(),
        r.g.lambda2.to_string(),
        r.stationarity.v1.to_string(),
        r.stationarity.v2.to_string(),
        r.stationarity.total.to_string(),
        r.stationarity.in_regime.to_string(),
        r.complexity.trajectories_per_agent.to_string(),
        r.complexity.total_messages.to_string(),
    ])?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Result of comparing exact gradients with finite differences of exact returns.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub probes: usize,
    /// Largest absolute gradient/finite-difference gap over probes and reward streams.
    pub max_fd_gap: f64,
    /// Largest `|Σ p(τ) − 1|` over probes.
    pub max_mass_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const ORACLE_FD_STEP: f64 = 1e-5;
pub const ORACLE_FD_TOL: f64 = 1e-8;

/// Cross-checks the enumeration oracle on the config's tabular MDP at random points.
pub fn oracle_check(cfg: &ExperimentConfig, probes: usize) -> Result<OracleCheck> {
    if cfg.env != EnvKind::Tabular {
        return Err(Error::InvalidConfig("oracle-check requires env = tabular".into()));
    }
    let mdp = load_tabular(cfg)?;
    let (h, gamma) = (mdp.horizon(), mdp.gamma());
    mdp.check_enumerable(h)?;
    let policy = TabularSoftmaxPolicy::for_mdp(&mdp);
    let mut rng = stream_rng(cfg.seed, INIT_STREAM);
    let mut targets: Vec<RewardTarget> = (0..cfg.agents).map(RewardTarget::Agent).collect();
    targets.push(RewardTarget::Collective);
    let (mut gap, mut mass_err) = (0.0f64, 0.0f64);
    for _ in 0..probes {
        let theta: Vec<f64> = (0..policy.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        for &t in &targets {
            gap = gap.max(oracle::gradient_fd_gap(&mdp, &policy, &theta, h, gamma, t, ORACLE_FD_STEP)?);
        }
        let v = oracle::exact_values(&mdp, &policy, &theta, h, gamma, &[RewardTarget::Collective])?;
        mass_err = mass_err.max((v.mass - 1.0).abs());
    }
    Ok(OracleCheck {
        probes,
        max_fd_gap: gap,
        max_mass_error: mass_err,
        tolerance: ORACLE_FD_TOL,
        passed: gap <= ORACLE_FD_TOL && mass_err <= 1e-10,
    })
}
