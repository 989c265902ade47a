//! Trajectory sampling and the policy-gradient estimators.
//!
//! All estimators are pure functions of their inputs. Batches are reduced in
//! trajectory order so results do not depend on how rollouts were scheduled.

use rand::Rng;

use crate::env::Environment;
use crate::error::{Error, Result};
use crate::params::ParamVector;
use crate::policy::Policy;
use crate::trajectory::{RewardTarget, Trajectory};

/// Default clip for `|log ω|` before exponentiation.
pub const DEFAULT_LOG_CAP: f64 = 20.0;

/// Hyper-parameters shared by all estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorSettings {
    pub gamma: f64,
    /// Constant baseline `b` subtracted from every discounted reward.
    pub baseline: f64,
    pub log_cap: f64,
}

impl EstimatorSettings {
    pub fn new(gamma: f64) -> Self {
        Self { gamma, baseline: 0.0, log_cap: DEFAULT_LOG_CAP }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradEstimate {
    pub gradient: ParamVector,
    /// Trajectories consumed.
    pub count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceWeight {
    /// Unclipped `log p(τ|θ_ref) − log p(τ|θ_cur)`.
    pub log_omega: f64,
    /// `exp(clamp(log_omega, ±cap))`
    pub omega: f64,
    pub clipped: bool,
}

/// Output of [`svrg_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SvrgEstimate {
    pub estimate: GradEstimate,
    /// Number of importance weights that hit the clip.
    pub clipped: usize,
}

/// One episode of `horizon` steps under `params`.
pub fn rollout<E, P, R>(
    env: &E,
    policy: &P,
    params: &[f64],
    horizon: usize,
    rng: &mut R,
) -> Result<Trajectory<E::State, E::Action>>
where
    E: Environment,
    P: Policy<E::State, E::Action>,
    R: Rng + ?Sized,
{
    let mut state = env.reset(rng);
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon);
    let mut rewards = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let action = policy.act(params, &state, rng)?;
        let step = env.step(&state, &env.project_action(&action), rng)?;
        states.push(std::mem::replace(&mut state, step.next_state));
        actions.push(action);
        rewards.push(step.rewards);
    }
    states.push(state);
    Ok(Trajectory { states, actions, rewards })
}

/// `count` independent episodes drawn sequentially from one RNG stream.
pub fn sample_trajectories<E, P, R>(
    env: &E,
    policy: &P,
    params: &[f64],
    count: usize,
    horizon: usize,
    rng: &mut R,
) -> Result<Vec<Trajectory<E::State, E::Action>>>
where
    E: Environment,
    P: Policy<E::State, E::Action>,
    R: Rng + ?Sized,
{
    if count == 0 || horizon == 0 {
        return Err(Error::InvalidConfig("trajectory count and horizon must be at least 1".into()));
    }
    (0..count).map(|_| rollout(env, policy, params, horizon, rng)).collect()
}

/// Single-trajectory G(PO)MDP estimate added into `out` with weight `scale`.
///
/// `Σ_h (Σ_{t≤h} ∇log π(a^t|s^t)) (γ^h r^h − b)` is evaluated as
/// `Σ_t ∇log π(a^t|s^t) · Σ_{h≥t} (γ^h r^h − b)`, which needs one score evaluation per step.
pub fn add_trajectory_gradient<S, A, P: Policy<S, A>>(
    traj: &Trajectory<S, A>,
    policy: &P,
    params: &[f64],
    settings: &EstimatorSettings,
    target: RewardTarget,
    scale: f64,
    out: &mut [f64],
) {
    let horizon = traj.horizon();
    let mut weights = vec![0.0; horizon];
    let mut discount = 1.0;
    for (h, w) in weights.iter_mut().enumerate() {
        *w = discount * traj.reward(h, target) - settings.baseline;
        discount *= settings.gamma;
    }
    let mut suffix = 0.0;
    for t in (0..horizon).rev() {
        suffix += weights[t];
        weights[t] = suffix;
    }
    for t in 0..horizon {
        if weights[t] != 0.0 {
            policy.add_grad_log_prob(params, &traj.states[t], &traj.actions[t], scale * weights[t], out);
        }
    }
}

/// `g(τ|θ)` for a single trajectory.
pub fn trajectory_gradient<S, A, P: Policy<S, A>>(
    traj: &Trajectory<S, A>,
    policy: &P,
    params: &[f64],
    settings: &EstimatorSettings,
    target: RewardTarget,
) -> ParamVector {
    let mut g = ParamVector::zeros(policy.dim());
    add_trajectory_gradient(traj, policy, params, settings, target, 1.0, &mut g);
    g
}

/// Batch mean of G(PO)MDP estimates.
pub fn gpomdp<S, A, P: Policy<S, A>>(
    batch: &[Trajectory<S, A>],
    policy: &P,
    params: &[f64],
    settings: &EstimatorSettings,
    target: RewardTarget,
) -> Result<GradEstimate> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut sum = ParamVector::zeros(policy.dim());
    for traj in batch {
        add_trajectory_gradient(traj, policy, params, settings, target, 1.0, &mut sum);
    }
    sum.scale(1.0 / batch.len() as f64);
    Ok(GradEstimate { gradient: sum, count: batch.len() })
}

/// Reference-point gradient `μ̃_i` from the epoch's large batch, sampled at `params_ref`.
pub fn outer_estimate<S, A, P: Policy<S, A>>(
    batch: &[Trajectory<S, A>],
    policy: &P,
    params_ref: &[f64],
    settings: &EstimatorSettings,
    agent: usize,
) -> Result<GradEstimate> {
    gpomdp(batch, policy, params_ref, settings, RewardTarget::Agent(agent))
}

/// `ω(τ|θ_cur, θ_ref) = p(τ|θ_ref) / p(τ|θ_cur)`. Dynamics and the initial distribution
/// cancel, leaving the ratio of policy likelihoods.
pub fn importance_weight<S, A, P: Policy<S, A>>(
    traj: &Trajectory<S, A>,
    policy: &P,
    params_cur: &[f64],
    params_ref: &[f64],
    log_cap: f64,
) -> Result<ImportanceWeight> {
    let mut log_omega = 0.0;
    for (s, a) in traj.states.iter().zip(&traj.actions) {
        log_omega += policy.log_prob(params_ref, s, a) - policy.log_prob(params_cur, s, a);
    }
    if log_omega.is_nan() {
        return Err(Error::NonFinite("importance weight log-ratio".into()));
    }
    let clipped_log = log_omega.clamp(-log_cap, log_cap);
    Ok(ImportanceWeight { log_omega, omega: clipped_log.exp(), clipped: clipped_log != log_omega })
}

/// Variance-reduced estimate at `params_cur` anchored at `(params_ref, mu_ref)`:
/// `v = μ̃ + (1/B) Σ_b [g(τ_b|θ_cur) − ω(τ_b|θ_cur, θ_ref) g(τ_b|θ_ref)]`, where the
/// batch was sampled at `params_cur`.
#[allow(clippy::too_many_arguments)]
pub fn svrg_estimate<S, A, P: Policy<S, A>>(
    batch: &[Trajectory<S, A>],
    policy: &P,
    params_cur: &[f64],
    params_ref: &[f64],
    mu_ref: &[f64],
    settings: &EstimatorSettings,
    agent: usize,
) -> Result<SvrgEstimate> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let target = RewardTarget::Agent(agent);
    let dim = policy.dim();
    let mut correction = ParamVector::zeros(dim);
    let mut g_cur = ParamVector::zeros(dim);
    let mut g_ref = ParamVector::zeros(dim);
    let mut clipped = 0;
    for traj in batch {
        g_cur.fill(0.0);
        g_ref.fill(0.0);
        add_trajectory_gradient(traj, policy, params_cur, settings, target, 1.0, &mut g_cur);
        add_trajectory_gradient(traj, policy, params_ref, settings, target, 1.0, &mut g_ref);
        let w = importance_weight(traj, policy, params_cur, params_ref, settings.log_cap)?;
        clipped += usize::from(w.clipped);
        for ((c, a), b) in correction.iter_mut().zip(g_cur.iter()).zip(g_ref.iter()) {
            *c += a - w.omega * b;
        }
    }
    correction.scale(1.0 / batch.len() as f64);
    for (c, m) in correction.iter_mut().zip(mu_ref) {
        *c += m;
    }
    Ok(SvrgEstimate { estimate: GradEstimate { gradient: correction, count: batch.len() }, clipped })
}
