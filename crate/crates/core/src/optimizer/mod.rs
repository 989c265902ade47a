//! DGT-SVRPG and the two distributed baselines.
//!
//! Every agent owns a ChaCha8 stream keyed by its index, so per-agent sampling can run
//! on any number of threads and still produce bit-identical results. Mixing is a
//! barrier: it runs after every agent has finished its local work for the iteration.

mod adam;
mod source;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

pub use adam::{AdamSettings, AdamState};
pub use source::{Estimate, Evaluation, ExactSource, GradientSource, SampledSource};

use crate::error::{Error, Result};
use crate::graph::MixingMatrix;
use crate::params::{disagreement_sq, mean_of, ParamVector};

/// Stream used for initial parameters.
pub const INIT_STREAM: u64 = u64::MAX;
/// Stream used for evaluation rollouts.
pub const EVAL_STREAM: u64 = u64::MAX - 1;
/// Stream used to draw the output index.
pub const SELECT_STREAM: u64 = u64::MAX - 2;

/// Slack added to the right-hand side of the per-step contraction inequality.
pub const CONTRACTION_SLACK: f64 = 1e-9;

/// ChaCha8 generator for `seed` on a given stream. Agent `i` uses stream `i`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Variant {
    /// Variance-reduced estimates with gradient tracking.
    DgtSvrpg,
    /// Consensus averaging plus a fresh local G(PO)MDP step.
    DGpomdp,
    /// Gradient tracking over fresh G(PO)MDP estimates.
    DgtGpomdp,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::DgtSvrpg => "dgt_svrpg",
            Variant::DGpomdp => "d_gpomdp",
            Variant::DgtGpomdp => "dgt_gpomdp",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "dgt_svrpg" => Ok(Variant::DgtSvrpg),
            "d_gpomdp" => Ok(Variant::DGpomdp),
            "dgt_gpomdp" => Ok(Variant::DgtGpomdp),
            other => Err(Error::InvalidConfig(format!("unknown variant `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoConfig {
    pub variant: Variant,
    /// S
    pub epochs: usize,
    /// K
    pub epoch_len: usize,
    /// M
    pub batch: usize,
    /// B
    pub minibatch: usize,
    /// Iteration count for the baselines. Defaults to `S·K`.
    pub iterations: Option<usize>,
    pub alpha: f64,
    pub adam: Option<AdamSettings>,
    pub seed: u64,
    pub hetero_init: bool,
    /// Evaluate `θ̄` every this many iterations (always at the first and last).
    pub eval_every: usize,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            variant: Variant::DgtSvrpg,
            epochs: 10,
            epoch_len: 2,
            batch: 10,
            minibatch: 5,
            iterations: None,
            alpha: 0.01,
            adam: None,
            seed: 0,
            hetero_init: false,
            eval_every: 1,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epochs_S", self.epochs),
            ("epoch_len_K", self.epoch_len),
            ("batch_M", self.batch),
            ("minibatch_B", self.minibatch),
            ("eval_every", self.eval_every),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be at least 1")));
            }
        }
        if self.iterations == Some(0) {
            return Err(Error::InvalidConfig("iterations must be at least 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if let Some(a) = &self.adam {
            let ok = (0.0..1.0).contains(&a.beta1) && (0.0..1.0).contains(&a.beta2) && a.eps > 0.0;
            if !ok {
                return Err(Error::InvalidConfig("adam betas must lie in [0,1) and eps > 0".into()));
            }
        }
        Ok(())
    }

    /// Number of parameter updates the run performs.
    pub fn total_iterations(&self) -> usize {
        match self.variant {
            Variant::DgtSvrpg => self.epochs * self.epoch_len,
            _ => self.iterations.unwrap_or(self.epochs * self.epoch_len),
        }
    }

    /// Trajectories each agent consumes over a full run.
    pub fn trajectories_per_agent(&self) -> usize {
        let t = self.total_iterations();
        match self.variant {
            Variant::DgtSvrpg => self.epochs * (self.batch + self.epoch_len * self.minibatch),
            Variant::DGpomdp => t * self.batch,
            Variant::DgtGpomdp => (t + 1) * self.batch,
        }
    }
}

/// One agent's local state.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub theta: ParamVector,
    pub y: ParamVector,
    pub v: ParamVector,
    pub theta_ref: ParamVector,
    pub mu_ref: ParamVector,
    pub adam: Option<AdamState>,
    pub rng: ChaCha8Rng,
}

/// Outcome of one consensus step, checked against the per-step contraction bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContractionCheck {
    pub before: f64,
    pub after: f64,
    /// `‖d − 1d̄‖²` of the step direction actually applied (`α y` or the Adam step).
    pub direction_dev: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Per-iteration metrics row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricsRow {
    pub iter: usize,
    /// Cumulative trajectories sampled by each agent.
    pub trajectories: usize,
    pub return_mean: f64,
    pub consensus_err: f64,
    pub tracking_err: f64,
    pub gradnorm: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunMetrics {
    /// Row 0 describes the initial state; row `k` the state after update `k`.
    pub rows: Vec<MetricsRow>,
    pub trajectories_per_agent: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// `max_j |ȳ_j − v̄_j|` after every tracker update.
    pub tracking_gaps: Vec<f64>,
    pub contraction: Vec<ContractionCheck>,
    pub clipped_weights: usize,
}

impl Diagnostics {
    pub fn max_tracking_gap(&self) -> f64 {
        self.tracking_gaps.iter().copied().fold(0.0, f64::max)
    }

    pub fn contraction_holds(&self) -> bool {
        self.contraction.iter().all(|c| c.holds)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    /// Per-agent parameters at the selected iterate.
    pub theta_out: Vec<ParamVector>,
    /// Index of the selected iterate in visiting order.
    pub output_index: usize,
    /// `(s, k)` of the selected iterate for DGT-SVRPG.
    pub output_epoch_step: Option<(usize, usize)>,
    pub metrics: RunMetrics,
    pub diagnostics: Diagnostics,
    /// Parameters after the last update.
    pub theta_final: Vec<ParamVector>,
}

/// Stacked state of all agents plus the mixing matrix.
#[derive(Debug, Clone)]
pub struct RunState {
    agents: Vec<AgentState>,
    mixing: MixingMatrix,
    adam: Option<AdamSettings>,
    epoch: usize,
    step: usize,
    trajectories: usize,
    clipped: usize,
    anchor_fresh: bool,
}

impl RunState {
    /// Builds the initial state: shared (or per-agent) `θ₀` and the initial trackers.
    pub fn init(cfg: &AlgoConfig, mixing: MixingMatrix, source: &dyn GradientSource) -> Result<Self> {
        cfg.validate()?;
        let n = mixing.n();
        if source.n_agents() != n {
            return Err(Error::Shape(format!(
                "mixing matrix has {n} agents but the environment has {}",
                source.n_agents()
            )));
        }
        let mut init_rng = stream_rng(cfg.seed, INIT_STREAM);
        let shared = source.init_params(&mut init_rng);
        if shared.len() != source.dim() {
            return Err(Error::Shape("policy initializer returned the wrong dimension".into()));
        }
        let thetas: Vec<ParamVector> = (0..n)
            .map(|i| if cfg.hetero_init && i > 0 { source.init_params(&mut init_rng) } else { shared.clone() })
            .collect();
        let zeros = vec![ParamVector::zeros(source.dim()); n];
        let mut state = Self::from_parts(mixing, thetas, zeros.clone(), zeros, cfg.seed, cfg.adam)?;
        match cfg.variant {
            Variant::DGpomdp => {}
            Variant::DgtGpomdp | Variant::DgtSvrpg => {
                let est = state.par_agents(|i, a| source.gradient(i, &a.theta, cfg.batch, &mut a.rng))?;
                let count = state.account(&est);
                state.trajectories += count;
                for (a, e) in state.agents.iter_mut().zip(est) {
                    a.y = e.gradient.clone();
                    a.v = e.gradient.clone();
                    a.theta_ref = a.theta.clone();
                    a.mu_ref = e.gradient;
                }
                state.anchor_fresh = cfg.variant == Variant::DgtSvrpg;
            }
        }
        Ok(state)
    }

    /// State with explicit per-agent vectors. `θ_ref` starts at `θ` and `μ̃` at `v`.
    pub fn from_parts(
        mixing: MixingMatrix,
        thetas: Vec<ParamVector>,
        ys: Vec<ParamVector>,
        vs: Vec<ParamVector>,
        seed: u64,
        adam: Option<AdamSettings>,
    ) -> Result<Self> {
        let n = mixing.n();
        if thetas.len() != n || ys.len() != n || vs.len() != n {
            return Err(Error::Shape(format!("expected {n} agents")));
        }
        let dim = thetas.first().map_or(0, |t| t.len());
        if thetas.iter().chain(&ys).chain(&vs).any(|x| x.len() != dim) {
            return Err(Error::Shape("agent vectors differ in dimension".into()));
        }
        let agents = thetas
            .into_iter()
            .zip(ys)
            .zip(vs)
            .enumerate()
            .map(|(i, ((theta, y), v))| AgentState {
                theta_ref: theta.clone(),
                mu_ref: v.clone(),
                theta,
                y,
                v,
                adam: adam.map(|_| AdamState::new(dim)),
                rng: stream_rng(seed, i as u64),
            })
            .collect();
        Ok(Self { agents, mixing, adam, epoch: 0, step: 0, trajectories: 0, clipped: 0, anchor_fresh: false })
    }

    pub fn n(&self) -> usize {
        self.agents.len()
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn mixing(&self) -> &MixingMatrix {
        &self.mixing
    }

    pub fn thetas(&self) -> Vec<ParamVector> {
        self.agents.iter().map(|a| a.theta.clone()).collect()
    }

    pub fn ys(&self) -> Vec<ParamVector> {
        self.agents.iter().map(|a| a.y.clone()).collect()
    }

    pub fn vs(&self) -> Vec<ParamVector> {
        self.agents.iter().map(|a| a.v.clone()).collect()
    }

    pub fn theta_bar(&self) -> ParamVector {
        mean_of(&self.thetas())
    }

    pub fn consensus_error(&self) -> f64 {
        disagreement_sq(&self.thetas())
    }

    pub fn tracking_error(&self) -> f64 {
        disagreement_sq(&self.ys())
    }

    /// `max_j |ȳ_j − v̄_j|`
    pub fn tracking_gap(&self) -> f64 {
        let (y, v) = (mean_of(&self.ys()), mean_of(&self.vs()));
        y.iter().zip(v.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Current epoch and inner step.
    pub fn counters(&self) -> (usize, usize) {
        (self.epoch, self.step)
    }

    /// Trajectories sampled so far by each agent.
    pub fn trajectories_per_agent(&self) -> usize {
        self.trajectories
    }

    pub fn clipped_weights(&self) -> usize {
        self.clipped
    }

    fn par_agents<F>(&mut self, f: F) -> Result<Vec<Estimate>>
    where
        F: Fn(usize, &mut AgentState) -> Result<Estimate> + Sync + Send,
    {
        self.agents.par_iter_mut().enumerate().map(|(i, a)| f(i, a)).collect()
    }

    /// Adds clip counts and returns the per-agent trajectory count (equal across agents).
    fn account(&mut self, est: &[Estimate]) -> usize {
        self.clipped += est.iter().map(|e| e.clipped).sum::<usize>();
        est.first().map_or(0, |e| e.trajectories)
    }

    /// Row `i` of `W ⊗ I` applied to the stacked vectors selected by `pick`.
    fn mix(&self, i: usize, pick: impl Fn(&AgentState) -> &ParamVector) -> ParamVector {
        let dim = pick(&self.agents[i]).len();
        let mut acc = ParamVector::zeros(dim);
        for (r, a) in self.agents.iter().enumerate() {
            let w = self.mixing.weight(i, r);
            if w != 0.0 {
                acc.axpy(w, pick(a));
            }
        }
        acc
    }

    fn consensus_with(&mut self, directions: Vec<ParamVector>) -> ContractionCheck {
        let before = self.consensus_error();
        let direction_dev = disagreement_sq(&directions);
        let mixed: Vec<ParamVector> = (0..self.n()).map(|i| self.mix(i, |a| &a.theta)).collect();
        for ((a, mut m), d) in self.agents.iter_mut().zip(mixed).zip(&directions) {
            m.axpy(1.0, d);
            a.theta = m;
        }
        let after = self.consensus_error();
        let s2 = self.mixing.sigma().powi(2);
        let bound = (1.0 + s2) / 2.0 * before + 2.0 / (1.0 - s2) * direction_dev + CONTRACTION_SLACK;
        ContractionCheck { before, after, direction_dev, bound, holds: after <= bound }
    }

    fn directions(&mut self, alpha: f64, from: impl Fn(&AgentState) -> &ParamVector) -> Vec<ParamVector> {
        let adam = self.adam;
        let mut out = Vec::with_capacity(self.n());
        for a in &mut self.agents {
            let g = from(a).clone();
            let d = match (adam, a.adam.as_mut()) {
                (Some(s), Some(st)) => st.scale(&g, alpha, &s),
                _ => {
                    let mut d = g;
                    d.scale(alpha);
                    d
                }
            };
            out.push(d);
        }
        out
    }

    /// `θ_{k+1} = (W ⊗ I) θ_k + α y_k` (or the Adam-scaled `y_k`).
    pub fn consensus_param_step(&mut self, alpha: f64) -> ContractionCheck {
        let d = self.directions(alpha, |a| &a.y);
        self.consensus_with(d)
    }

    /// `y_{k+1} = (W ⊗ I) y_k + v_{k+1} − v_k`. Returns `max_j |ȳ − v̄|` afterwards.
    pub fn tracker_step(&mut self, v_new: Vec<ParamVector>) -> Result<f64> {
        if v_new.len() != self.n() || v_new.iter().any(|v| v.len() != self.agents[0].v.len()) {
            return Err(Error::Shape("tracker update has the wrong shape".into()));
        }
        let mixed: Vec<ParamVector> = (0..self.n()).map(|i| self.mix(i, |a| &a.y)).collect();
        for ((a, mut m), v) in self.agents.iter_mut().zip(mixed).zip(v_new) {
            m.axpy(1.0, &v);
            m.axpy(-1.0, &a.v);
            a.y = m;
            a.v = v;
        }
        Ok(self.tracking_gap())
    }

    /// Draws the anchor `μ̃_i` at `θ̃_i = θ_i` from `M` trajectories, unless the initial
    /// batch is still current.
    fn refresh_anchor(&mut self, cfg: &AlgoConfig, source: &dyn GradientSource) -> Result<()> {
        if std::mem::take(&mut self.anchor_fresh) {
            return Ok(());
        }
        let est = self.par_agents(|i, a| source.gradient(i, &a.theta, cfg.batch, &mut a.rng))?;
        self.trajectories += self.account(&est);
        for (a, e) in self.agents.iter_mut().zip(est) {
            a.theta_ref = a.theta.clone();
            a.mu_ref = e.gradient;
        }
        Ok(())
    }

    /// One inner iteration of DGT-SVRPG.
    fn svrpg_step(&mut self, cfg: &AlgoConfig, source: &dyn GradientSource) -> Result<(ContractionCheck, f64)> {
        let check = self.consensus_param_step(cfg.alpha);
        let est = self.par_agents(|i, a| {
            source.svrg(i, &a.theta, &a.theta_ref, &a.mu_ref, cfg.minibatch, &mut a.rng)
        })?;
        self.trajectories += self.account(&est);
        let gap = self.tracker_step(est.into_iter().map(|e| e.gradient).collect())?;
        self.step += 1;
        Ok((check, gap))
    }

    /// One epoch of DGT-SVRPG: anchor refresh followed by `K` inner iterations.
    pub fn run_epoch(&mut self, cfg: &AlgoConfig, source: &dyn GradientSource) -> Result<()> {
        let mut rec = Recorder::detached();
        self.run_epoch_recorded(cfg, source, &mut rec)
    }

    fn run_epoch_recorded(&mut self, cfg: &AlgoConfig, source: &dyn GradientSource, rec: &mut Recorder) -> Result<()> {
        self.refresh_anchor(cfg, source)?;
        self.step = 0;
        for _ in 0..cfg.epoch_len {
            rec.visit(self);
            let (check, gap) = self.svrpg_step(cfg, source)?;
            rec.after_step(self, source, Some(check), Some(gap))?;
        }
        self.epoch += 1;
        Ok(())
    }

    fn dgt_gpomdp_step(&mut self, cfg: &AlgoConfig, source: &dyn GradientSource) -> Result<(ContractionCheck, f64)> {
        let check = self.consensus_param_step(cfg.alpha);
        let est = self.par_agents(|i, a| source.gradient(i, &a.theta, cfg.batch, &mut a.rng))?;
        self.trajectories += self.account(&est);
        let gap = self.tracker_step(est.into_iter().map(|e| e.gradient).collect())?;
        self.step += 1;
        Ok((check, gap))
    }

    fn d_gpomdp_step(&mut self, cfg: &AlgoConfig, source: &dyn GradientSource) -> Result<ContractionCheck> {
        let est = self.par_agents(|i, a| source.gradient(i, &a.theta, cfg.batch, &mut a.rng))?;
        self.trajectories += self.account(&est);
        for (a, e) in self.agents.iter_mut().zip(est) {
            a.y = e.gradient.clone();
            a.v = e.gradient;
        }
        let d = self.directions(cfg.alpha, |a| &a.v);
        let check = self.consensus_with(d);
        self.step += 1;
        Ok(check)
    }
}

/// Collects metrics, diagnostics and the selected output iterate.
struct Recorder {
    rows: Vec<MetricsRow>,
    diagnostics: Diagnostics,
    eval_rng: Option<ChaCha8Rng>,
    eval_every: usize,
    total: usize,
    out_index: usize,
    visited: usize,
    selected: Option<(Vec<ParamVector>, Option<(usize, usize)>)>,
    last_eval: Evaluation,
    epochs: bool,
}

impl Recorder {
    fn new(cfg: &AlgoConfig) -> Self {
        let total = cfg.total_iterations();
        let out_index = stream_rng(cfg.seed, SELECT_STREAM).random_range(0..total);
        Self {
            rows: Vec::with_capacity(total + 1),
            diagnostics: Diagnostics::default(),
            eval_rng: Some(stream_rng(cfg.seed, EVAL_STREAM)),
            eval_every: cfg.eval_every,
            total,
            out_index,
            visited: 0,
            selected: None,
            last_eval: Evaluation { global_return: f64::NAN, gradnorm_sq: None },
            epochs: cfg.variant == Variant::DgtSvrpg,
        }
    }

    fn detached() -> Self {
        Self {
            rows: Vec::new(),
            diagnostics: Diagnostics::default(),
            eval_rng: None,
            eval_every: 1,
            total: 0,
            out_index: usize::MAX,
            visited: 0,
            selected: None,
            last_eval: Evaluation { global_return: f64::NAN, gradnorm_sq: None },
            epochs: true,
        }
    }

    fn visit(&mut self, state: &RunState) {
        if self.visited == self.out_index {
            let pos = self.epochs.then_some((state.epoch, state.step));
            self.selected = Some((state.thetas(), pos));
        }
        self.visited += 1;
    }

    fn record(&mut self, state: &RunState, source: &dyn GradientSource) -> Result<()> {
        let Some(rng) = self.eval_rng.as_mut() else {
            return Ok(());
        };
        let iter = self.rows.len();
        if iter.is_multiple_of(self.eval_every) || iter == self.total {
            self.last_eval = source.evaluate(&state.theta_bar(), rng)?;
        }
        let gradnorm = match self.last_eval.gradnorm_sq {
            Some(g) => g,
            None => {
                let mut g = mean_of(&state.vs());
                g.scale(state.n() as f64);
                g.norm_sq()
            }
        };
        self.rows.push(MetricsRow {
            iter,
            trajectories: state.trajectories,
            return_mean: self.last_eval.global_return,
            consensus_err: state.consensus_error(),
            tracking_err: state.tracking_error(),
            gradnorm,
        });
        Ok(())
    }

    fn after_step(
        &mut self,
        state: &RunState,
        source: &dyn GradientSource,
        check: Option<ContractionCheck>,
        gap: Option<f64>,
    ) -> Result<()> {
        self.diagnostics.contraction.extend(check);
        self.diagnostics.tracking_gaps.extend(gap);
        self.record(state, source)
    }
}

/// Runs the configured variant to completion.
pub fn run(cfg: &AlgoConfig, mixing: MixingMatrix, source: &dyn GradientSource) -> Result<RunOutput> {
    let mut state = RunState::init(cfg, mixing, source)?;
    let mut rec = Recorder::new(cfg);
    rec.record(&state, source)?;
    match cfg.variant {
        Variant::DgtSvrpg => {
            for _ in 0..cfg.epochs {
                state.run_epoch_recorded(cfg, source, &mut rec)?;
            }
        }
        Variant::DgtGpomdp => {
            for _ in 0..cfg.total_iterations() {
                rec.visit(&state);
                let (check, gap) = state.dgt_gpomdp_step(cfg, source)?;
                rec.after_step(&state, source, Some(check), Some(gap))?;
            }
        }
        Variant::DGpomdp => {
            for _ in 0..cfg.total_iterations() {
                rec.visit(&state);
                let check = state.d_gpomdp_step(cfg, source)?;
                rec.after_step(&state, source, Some(check), None)?;
            }
        }
    }
    rec.diagnostics.clipped_weights = state.clipped;
    let (theta_out, output_epoch_step) = rec.selected.take().expect("output index lies inside the run");
    Ok(RunOutput {
        theta_out,
        output_index: rec.out_index,
        output_epoch_step,
        metrics: RunMetrics { rows: rec.rows, trajectories_per_agent: state.trajectories },
        diagnostics: rec.diagnostics,
        theta_final: state.thetas(),
    })
}
