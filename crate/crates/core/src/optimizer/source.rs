use rand_chacha::ChaCha8Rng;

use crate::env::{Environment, TabularMdp};
use crate::error::Result;
use crate::estimator::{self, EstimatorSettings};
use crate::oracle;
use crate::params::ParamVector;
use crate::policy::{Policy, TabularSoftmaxPolicy};
use crate::trajectory::RewardTarget;

/// A local gradient estimate and the sampling it cost.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub gradient: ParamVector,
    pub trajectories: usize,
    pub clipped: usize,
}

/// Evaluation of the network-average parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    /// Average discounted global return `Σ_i R_i(τ)`.
    pub global_return: f64,
    /// `‖∇J(θ̄)‖²` when it can be computed exactly.
    pub gradnorm_sq: Option<f64>,
}

/// Where agents get their local gradients from: sampled rollouts, or exact
/// enumeration on a tabular MDP.
pub trait GradientSource: Sync {
    fn dim(&self) -> usize;
    fn n_agents(&self) -> usize;
    fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamVector;

    /// Batch G(PO)MDP estimate of `∇J_i(θ)` from `batch` fresh trajectories.
    fn gradient(&self, agent: usize, theta: &ParamVector, batch: usize, rng: &mut ChaCha8Rng) -> Result<Estimate>;

    /// Variance-reduced estimate at `theta` anchored at `(theta_ref, mu_ref)`.
    fn svrg(
        &self,
        agent: usize,
        theta: &ParamVector,
        theta_ref: &ParamVector,
        mu_ref: &ParamVector,
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Estimate>;

    fn evaluate(&self, theta_bar: &ParamVector, rng: &mut ChaCha8Rng) -> Result<Evaluation>;
}

type GradNormOracle = Box<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

/// Rollout-based estimators on any environment/policy pair.
pub struct SampledSource<E, P> {
    env: E,
    policy: P,
    settings: EstimatorSettings,
    horizon: usize,
    eval_rollouts: usize,
    gradnorm: Option<GradNormOracle>,
}

impl<E, P> SampledSource<E, P>
where
    E: Environment,
    P: Policy<E::State, E::Action>,
{
    pub fn new(env: E, policy: P, settings: EstimatorSettings, horizon: usize, eval_rollouts: usize) -> Self {
        Self { env, policy, settings, horizon, eval_rollouts, gradnorm: None }
    }

    /// Reports `‖∇J(θ̄)‖²` from an exact oracle instead of the estimator-based proxy.
    pub fn with_gradnorm_oracle(mut self, f: GradNormOracle) -> Self {
        self.gradnorm = Some(f);
        self
    }

    pub fn env(&self) -> &E {
        &self.env
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    pub fn settings(&self) -> &EstimatorSettings {
        &self.settings
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }
}

impl<E, P> GradientSource for SampledSource<E, P>
where
    E: Environment,
    P: Policy<E::State, E::Action>,
{
    fn dim(&self) -> usize {
        self.policy.dim()
    }

    fn n_agents(&self) -> usize {
        self.env.n_agents()
    }

    fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamVector {
        self.policy.init_params(rng)
    }

    fn gradient(&self, agent: usize, theta: &ParamVector, batch: usize, rng: &mut ChaCha8Rng) -> Result<Estimate> {
        let trajs = estimator::sample_trajectories(&self.env, &self.policy, theta, batch, self.horizon, rng)?;
        let est = estimator::gpomdp(&trajs, &self.policy, theta, &self.settings, RewardTarget::Agent(agent))?;
        Ok(Estimate { gradient: est.gradient, trajectories: est.count, clipped: 0 })
    }

    fn svrg(
        &self,
        agent: usize,
        theta: &ParamVector,
        theta_ref: &ParamVector,
        mu_ref: &ParamVector,
        batch: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Estimate> {
        let trajs = estimator::sample_trajectories(&self.env, &self.policy, theta, batch, self.horizon, rng)?;
        let v = estimator::svrg_estimate(&trajs, &self.policy, theta, theta_ref, mu_ref, &self.settings, agent)?;
        Ok(Estimate { gradient: v.estimate.gradient, trajectories: v.estimate.count, clipped: v.clipped })
    }

    fn evaluate(&self, theta_bar: &ParamVector, rng: &mut ChaCha8Rng) -> Result<Evaluation> {
        let mut total = 0.0;
        for _ in 0..self.eval_rollouts {
            let t = estimator::rollout(&self.env, &self.policy, theta_bar, self.horizon, rng)?;
            total += t.discounted_return(self.settings.gamma, RewardTarget::Collective);
        }
        let global_return = total / self.eval_rollouts.max(1) as f64;
        let gradnorm_sq = self.gradnorm.as_ref().map(|f| f(theta_bar)).transpose()?;
        Ok(Evaluation { global_return, gradnorm_sq })
    }
}

/// Exact gradients on a tabular MDP: every estimator call returns `∇J_i(θ)` itself and
/// consumes no trajectories.
#[derive(Debug, Clone)]
pub struct ExactSource {
    mdp: TabularMdp,
    policy: TabularSoftmaxPolicy,
    horizon: usize,
    gamma: f64,
}

impl ExactSource {
    pub fn new(mdp: TabularMdp) -> Self {
        let policy = TabularSoftmaxPolicy::for_mdp(&mdp);
        let (horizon, gamma) = (mdp.horizon(), mdp.gamma());
        Self { mdp, policy, horizon, gamma }
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    pub fn policy(&self) -> &TabularSoftmaxPolicy {
        &self.policy
    }

    pub fn local_gradient(&self, agent: usize, theta: &[f64]) -> Result<ParamVector> {
        oracle::exact_gradient(&self.mdp, &self.policy, theta, self.horizon, self.gamma, RewardTarget::Agent(agent))
    }

    /// `‖∇J(θ)‖²` for the collective objective.
    pub fn gradnorm_sq(&self, theta: &[f64]) -> Result<f64> {
        let g = oracle::exact_gradient(&self.mdp, &self.policy, theta, self.horizon, self.gamma, RewardTarget::Collective)?;
        Ok(g.norm_sq())
    }
}

impl GradientSource for ExactSource {
    fn dim(&self) -> usize {
        self.policy.dim()
    }

    fn n_agents(&self) -> usize {
        self.mdp.action_counts().len()
    }

    fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamVector {
        self.policy.init_params(rng)
    }

    fn gradient(&self, agent: usize, theta: &ParamVector, _batch: usize, _rng: &mut ChaCha8Rng) -> Result<Estimate> {
        Ok(Estimate { gradient: self.local_gradient(agent, theta)?, trajectories: 0, clipped: 0 })
    }

    fn svrg(
        &self,
        agent: usize,
        theta: &ParamVector,
        _theta_ref: &ParamVector,
        _mu_ref: &ParamVector,
        _batch: usize,
        _rng: &mut ChaCha8Rng,
    ) -> Result<Estimate> {
        // With exact anchors the correction term cancels identically.
        Ok(Estimate { gradient: self.local_gradient(agent, theta)?, trajectories: 0, clipped: 0 })
    }

    fn evaluate(&self, theta_bar: &ParamVector, _rng: &mut ChaCha8Rng) -> Result<Evaluation> {
        let v = oracle::exact_values(
            &self.mdp,
            &self.policy,
            theta_bar,
            self.horizon,
            self.gamma,
            &[RewardTarget::Collective],
        )?;
        Ok(Evaluation { global_return: v.returns[0], gradnorm_sq: Some(v.gradients[0].norm_sq()) })
    }
}
