//! Line-oriented `key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimator::DEFAULT_LOG_CAP;
use crate::graph::{parse_edge_list, TopologyKind};
use crate::optimizer::{AdamSettings, AlgoConfig, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    MountainCar,
    Tabular,
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mountaincar" | "mountain_car" => Ok(EnvKind::MountainCar),
            "tabular" => Ok(EnvKind::Tabular),
            _ => Err(format!("unknown env `{s}` (expected mountaincar|tabular)")),
        }
    }
}

impl EnvKind {
    fn name(self) -> &'static str {
        match self {
            EnvKind::MountainCar => "mountaincar",
            EnvKind::Tabular => "tabular",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    GaussianMlp,
    GaussianLinear,
    Tabular,
}

impl FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "gaussian_mlp" | "mlp" => Ok(PolicyKind::GaussianMlp),
            "gaussian_linear" | "linear" => Ok(PolicyKind::GaussianLinear),
            "tabular" | "softmax" => Ok(PolicyKind::Tabular),
            _ => Err(format!("unknown policy `{s}` (expected gaussian_mlp|gaussian_linear|tabular)")),
        }
    }
}

impl PolicyKind {
    fn name(self) -> &'static str {
        match self {
            PolicyKind::GaussianMlp => "gaussian_mlp",
            PolicyKind::GaussianLinear => "gaussian_linear",
            PolicyKind::Tabular => "tabular",
        }
    }
}

/// Fully validated experiment configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    /// `None` means the environment default (100 for MountainCar, the file's or 3 for tabular).
    pub horizon: Option<usize>,
    pub gamma: Option<f64>,
    pub goal_positions: Option<Vec<f64>>,
    /// JSON description; the built-in oracle MDP is used when absent.
    pub tabular_file: Option<PathBuf>,
    pub exact_gradients: bool,

    pub agents: usize,
    pub graph: TopologyKind,
    pub edges: Option<Vec<(usize, usize)>>,

    /// `None` picks the policy family matching the environment.
    pub policy: Option<PolicyKind>,
    pub hidden: usize,
    pub policy_sigma: f64,

    pub batch_m: usize,
    pub minibatch_b: usize,
    pub baseline_b: f64,
    pub iw_log_cap: f64,

    pub variant: Variant,
    pub epochs_s: usize,
    pub epoch_len_k: usize,
    pub iterations: Option<usize>,
    /// Per-agent trajectory budget; overrides `epochs_S` / `iterations`.
    pub total_trajectories: Option<usize>,
    pub alpha: f64,
    pub adam: bool,
    pub adam_settings: AdamSettings,

    pub seed: u64,
    pub repetitions: usize,
    pub hetero_init: bool,

    pub out_dir: PathBuf,
    /// Evaluate the average policy every this many iterations.
    pub metric_every: usize,
    pub eval_rollouts: usize,
    /// Number of final metric rows averaged in comparisons.
    pub final_window: usize,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            env: EnvKind::MountainCar,
            horizon: None,
            gamma: None,
            goal_positions: None,
            tabular_file: None,
            exact_gradients: false,
            agents: 3,
            graph: TopologyKind::Ring,
            edges: None,
            policy: None,
            hidden: 64,
            policy_sigma: 0.5,
            batch_m: 10,
            minibatch_b: 5,
            baseline_b: 0.0,
            iw_log_cap: DEFAULT_LOG_CAP,
            variant: Variant::DgtSvrpg,
            epochs_s: 10,
            epoch_len_k: 2,
            iterations: None,
            total_trajectories: None,
            alpha: 0.0025,
            adam: false,
            adam_settings: AdamSettings::default(),
            seed: 0,
            repetitions: 1,
            hetero_init: false,
            out_dir: PathBuf::from("out"),
            metric_every: 1,
            eval_rollouts: 10,
            final_window: 10,
            workers: 0,
        }
    }
}

pub const MOUNTAIN_CAR_HORIZON: usize = 100;
pub const MOUNTAIN_CAR_GAMMA: f64 = 0.99;

fn unquote(v: &str) -> &str {
    let v = v.trim();
    v.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(v)
}

fn parse_num<T: FromStr>(v: &str, what: &str) -> std::result::Result<T, String> {
    unquote(v).parse().map_err(|_| format!("expected {what}, got `{v}`"))
}

fn parse_bool(v: &str) -> std::result::Result<bool, String> {
    match unquote(v) {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        other => Err(format!("expected true|false, got `{other}`")),
    }
}

fn at_least(v: usize, min: usize) -> std::result::Result<usize, String> {
    if v < min {
        Err(format!("must be at least {min}, got {v}"))
    } else {
        Ok(v)
    }
}

fn positive(v: f64) -> std::result::Result<f64, String> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("must be positive and finite, got {v}"))
    }
}

fn unit_open(v: f64) -> std::result::Result<f64, String> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("must lie in (0, 1), got {v}"))
    }
}

fn beta(v: f64) -> std::result::Result<f64, String> {
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("must lie in [0, 1), got {v}"))
    }
}

impl ExperimentConfig {
    /// Parses and validates config text. Empty input yields the defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config { line: line_no, message: format!("expected `key = value`, got `{line}`") });
            };
            cfg.set(key.trim(), value.trim())
                .map_err(|message| Error::Config { line: line_no, message: format!("{}: {message}", key.trim()) })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        match key {
            "env" => self.env = unquote(v).parse()?,
            "horizon" => self.horizon = Some(at_least(parse_num(v, "an integer")?, 1)?),
            "gamma" => self.gamma = Some(unit_open(parse_num(v, "a number")?)?),
            "goal_positions" => {
                let inner = unquote(v).trim_start_matches('[').trim_end_matches(']');
                let goals = inner
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| parse_num::<f64>(s, "a number"))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                if goals.is_empty() {
                    return Err("needs at least one position".into());
                }
                self.goal_positions = Some(goals);
            }
            "tabular_file" => self.tabular_file = Some(PathBuf::from(unquote(v))),
            "exact_gradients" => self.exact_gradients = parse_bool(v)?,
            "agents" => self.agents = at_least(parse_num(v, "an integer")?, 1)?,
            "graph" => self.graph = unquote(v).parse().map_err(|e: Error| e.to_string())?,
            "edges" => self.edges = Some(parse_edge_list(unquote(v)).map_err(|e| e.to_string())?),
            "policy" => self.policy = Some(unquote(v).parse()?),
            "hidden" => self.hidden = at_least(parse_num(v, "an integer")?, 1)?,
            "policy_sigma" => self.policy_sigma = positive(parse_num(v, "a number")?)?,
            "batch_M" => self.batch_m = at_least(parse_num(v, "an integer")?, 1)?,
            "minibatch_B" => self.minibatch_b = at_least(parse_num(v, "an integer")?, 1)?,
            "baseline_b" => {
                let b: f64 = parse_num(v, "a number")?;
                if !b.is_finite() {
                    return Err("must be finite".into());
                }
                self.baseline_b = b;
            }
            "iw_log_cap" => self.iw_log_cap = positive(parse_num(v, "a number")?)?,
            "variant" => self.variant = unquote(v).parse().map_err(|e: Error| e.to_string())?,
            "epochs_S" => self.epochs_s = at_least(parse_num(v, "an integer")?, 1)?,
            "epoch_len_K" => self.epoch_len_k = at_least(parse_num(v, "an integer")?, 1)?,
            "iterations" => self.iterations = Some(at_least(parse_num(v, "an integer")?, 1)?),
            "total_trajectories" => self.total_trajectories = Some(at_least(parse_num(v, "an integer")?, 1)?),
            "alpha" => self.alpha = positive(parse_num(v, "a number")?)?,
            "adam" => self.adam = parse_bool(v)?,
            "adam_beta1" => self.adam_settings.beta1 = beta(parse_num(v, "a number")?)?,
            "adam_beta2" => self.adam_settings.beta2 = beta(parse_num(v, "a number")?)?,
            "adam_eps" => self.adam_settings.eps = positive(parse_num(v, "a number")?)?,
            "seed" => self.seed = parse_num(v, "an unsigned integer")?,
            "repetitions" => self.repetitions = at_least(parse_num(v, "an integer")?, 1)?,
            "hetero_init" => self.hetero_init = parse_bool(v)?,
            "out_dir" => self.out_dir = PathBuf::from(unquote(v)),
            "metric_every" => self.metric_every = at_least(parse_num(v, "an integer")?, 1)?,
            "eval_rollouts" => self.eval_rollouts = at_least(parse_num(v, "an integer")?, 1)?,
            "final_window" => self.final_window = at_least(parse_num(v, "an integer")?, 1)?,
            "workers" => self.workers = parse_num(v, "an integer")?,
            _ => return Err("unknown key".into()),
        }
        Ok(())
    }

    /// Cross-key consistency checks.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match (self.graph, &self.edges) {
            (TopologyKind::Custom, None) => return bad("graph = custom requires `edges`".into()),
            (k, Some(_)) if k != TopologyKind::Custom => return bad("`edges` is only valid with graph = custom".into()),
            _ => {}
        }
        let policy = self.policy_kind();
        match (self.env, policy) {
            (EnvKind::Tabular, PolicyKind::Tabular) => {}
            (EnvKind::MountainCar, PolicyKind::GaussianMlp | PolicyKind::GaussianLinear) => {}
            (e, p) => return bad(format!("policy {} does not fit env {}", p.name(), e.name())),
        }
        if self.exact_gradients && self.env != EnvKind::Tabular {
            return bad("exact_gradients requires env = tabular".into());
        }
        if self.tabular_file.is_some() && self.env != EnvKind::Tabular {
            return bad("tabular_file requires env = tabular".into());
        }
        if self.goal_positions.is_some() && self.env != EnvKind::MountainCar {
            return bad("goal_positions requires env = mountaincar".into());
        }
        if let Some(g) = &self.goal_positions {
            if g.len() != self.agents {
                return bad(format!("{} goal positions for {} agents", g.len(), self.agents));
            }
        }
        if self.iterations.is_some() && self.total_trajectories.is_some() {
            return bad("set at most one of `iterations` and `total_trajectories`".into());
        }
        self.algo_config()?.validate()
    }

    pub fn policy_kind(&self) -> PolicyKind {
        self.policy.unwrap_or(match self.env {
            EnvKind::MountainCar => PolicyKind::GaussianMlp,
            EnvKind::Tabular => PolicyKind::Tabular,
        })
    }

    /// Optimizer settings, with the trajectory budget turned into iteration counts.
    pub fn algo_config(&self) -> Result<AlgoConfig> {
        let mut epochs = self.epochs_s;
        let mut iterations = self.iterations;
        if let Some(total) = self.total_trajectories {
            let (m, k, b) = (self.batch_m, self.epoch_len_k, self.minibatch_b);
            let too_small = || Error::InvalidConfig(format!("total_trajectories = {total} is too small for {}", self.variant));
            match self.variant {
                Variant::DgtSvrpg => {
                    epochs = total / (m + k * b);
                    if epochs == 0 {
                        return Err(too_small());
                    }
                }
                Variant::DGpomdp => iterations = Some(Some(total / m).filter(|&t| t > 0).ok_or_else(too_small)?),
                Variant::DgtGpomdp => {
                    iterations = Some((total / m).checked_sub(1).filter(|&t| t > 0).ok_or_else(too_small)?)
                }
            }
        }
        Ok(AlgoConfig {
            variant: self.variant,
            epochs,
            epoch_len: self.epoch_len_k,
            batch: self.batch_m,
            minibatch: self.minibatch_b,
            iterations,
            alpha: self.alpha,
            adam: self.adam.then_some(self.adam_settings),
            seed: self.seed,
            hetero_init: self.hetero_init,
            eval_every: self.metric_every,
        })
    }

    /// Effective configuration in the same syntax the parser reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("env", self.env.name().into());
        if let Some(h) = self.horizon {
            kv("horizon", h.to_string());
        }
        if let Some(g) = self.gamma {
            kv("gamma", g.to_string());
        }
        if let Some(g) = &self.goal_positions {
            kv("goal_positions", g.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        }
        if let Some(p) = &self.tabular_file {
            kv("tabular_file", format!("\"{}\"", p.display()));
        }
        kv("exact_gradients", self.exact_gradients.to_string());
        kv("agents", self.agents.to_string());
        kv("graph", self.graph.to_string());
        if let Some(e) = &self.edges {
            kv("edges", format!("\"{}\"", e.iter().map(|(a, b)| format!("{a}-{b}")).collect::<Vec<_>>().join(",")));
        }
        kv("policy", self.policy_kind().name().into());
        kv("hidden", self.hidden.to_string());
        kv("policy_sigma", self.policy_sigma.to_string());
        kv("batch_M", self.batch_m.to_string());
        kv("minibatch_B", self.minibatch_b.to_string());
        kv("baseline_b", self.baseline_b.to_string());
        kv("iw_log_cap", self.iw_log_cap.to_string());
        kv("variant", self.variant.to_string());
        kv("epochs_S", self.epochs_s.to_string());
        kv("epoch_len_K", self.epoch_len_k.to_string());
        if let Some(t) = self.iterations {
            kv("iterations", t.to_string());
        }
        if let Some(t) = self.total_trajectories {
            kv("total_trajectories", t.to_string());
        }
        kv("alpha", self.alpha.to_string());
        kv("adam", self.adam.to_string());
        kv("adam_beta1", self.adam_settings.beta1.to_string());
        kv("adam_beta2", self.adam_settings.beta2.to_string());
        kv("adam_eps", self.adam_settings.eps.to_string());
        kv("seed", self.seed.to_string());
        kv("repetitions", self.repetitions.to_string());
        kv("hetero_init", self.hetero_init.to_string());
        kv("out_dir", format!("\"{}\"", self.out_dir.display()));
        kv("metric_every", self.metric_every.to_string());
        kv("eval_rollouts", self.eval_rollouts.to_string());
        kv("final_window", self.final_window.to_string());
        kv("workers", self.workers.to_string());
        s
    }
}

/// Problem constants for the `bounds` report, read from a `key = value` file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantsFile {
    pub g: f64,
    pub f: f64,
    pub v: f64,
    pub w_var: f64,
    pub l: f64,
    pub l_g: f64,
    pub c_g: f64,
    pub init_consensus: f64,
    pub init_tracking: f64,
    pub j_gap: f64,
}

impl Default for ConstantsFile {
    fn default() -> Self {
        Self {
            g: 1.0,
            f: 1.0,
            v: 1.0,
            w_var: 1.0,
            l: 1.0,
            l_g: 1.0,
            c_g: 1.0,
            init_consensus: 0.0,
            init_tracking: 0.0,
            j_gap: 1.0,
        }
    }
}

impl ConstantsFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut c = Self::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Config { line: idx + 1, message };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let key = key.trim();
            let x: f64 = parse_num(value, "a number").map_err(|m| err(format!("{key}: {m}")))?;
            let nonneg = matches!(key, "init_consensus" | "init_tracking" | "Wvar" | "j_gap" | "L_g" | "C_g");
            if !x.is_finite() || x < 0.0 || (!nonneg && x == 0.0) {
                return Err(err(format!("{key}: out of range ({x})")));
            }
            let slot = match key {
                "G" => &mut c.g,
                "F" => &mut c.f,
                "V" => &mut c.v,
                "Wvar" => &mut c.w_var,
                "L" => &mut c.l,
                "L_g" => &mut c.l_g,
                "C_g" => &mut c.c_g,
                "init_consensus" => &mut c.init_consensus,
                "init_tracking" => &mut c.init_tracking,
                "j_gap" => &mut c.j_gap,
                _ => return Err(err(format!("{key}: unknown key"))),
            };
            *slot = x;
        }
        Ok(c)
    }
}
