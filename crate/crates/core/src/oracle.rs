//! Exact returns and policy gradients of tabular MDPs by full trajectory expansion.
//!
//! `∇J(θ) = Σ_τ p(τ|θ) ∇log p(τ|θ) R(τ)` is summed over every trajectory with nonzero
//! probability. The tree walk shares prefixes, so a leaf costs `O(d)` rather than
//! `O(H d)`.

use crate::env::TabularMdp;
use crate::error::Result;
use crate::params::ParamVector;
use crate::policy::{Policy, TabularSoftmaxPolicy};
use crate::trajectory::RewardTarget;

/// Exact `J(θ)` and `∇J(θ)` for each requested reward stream.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactValues {
    pub returns: Vec<f64>,
    pub gradients: Vec<ParamVector>,
    /// Total probability mass visited; 1 up to rounding.
    pub mass: f64,
}

struct Walk<'a> {
    mdp: &'a TabularMdp,
    horizon: usize,
    gamma: f64,
    targets: &'a [RewardTarget],
    joint_probs: Vec<Vec<f64>>,
    /// `scores[s][joint]` = ∇log π(joint|s)
    scores: Vec<Vec<ParamVector>>,
    /// `rewards[s][joint][target]`
    rewards: Vec<Vec<Vec<f64>>>,
    score_stack: Vec<ParamVector>,
    return_stack: Vec<Vec<f64>>,
    out: ExactValues,
}

impl Walk<'_> {
    fn descend(&mut self, depth: usize, state: usize, prob: f64, discount: f64) {
        if depth == self.horizon {
            let score = &self.score_stack[depth];
            for (t, ret) in self.return_stack[depth].iter().enumerate() {
                self.out.returns[t] += prob * ret;
                self.out.gradients[t].axpy(prob * ret, score);
            }
            self.out.mass += prob;
            return;
        }
        for j in 0..self.mdp.joint_action_count() {
            let pa = self.joint_probs[state][j];
            if pa == 0.0 {
                continue;
            }
            let (lower, upper) = self.score_stack.split_at_mut(depth + 1);
            let next_score = &mut upper[0];
            next_score.copy_from_slice(&lower[depth]);
            next_score.axpy(1.0, &self.scores[state][j]);
            let (lower, upper) = self.return_stack.split_at_mut(depth + 1);
            for (t, r) in upper[0].iter_mut().enumerate() {
                *r = lower[depth][t] + discount * self.rewards[state][j][t];
            }
            for next in 0..self.mdp.n_states() {
                let pt = self.mdp.transition(state, j)[next];
                if pt == 0.0 {
                    continue;
                }
                self.descend(depth + 1, next, prob * pa * pt, discount * self.gamma);
            }
        }
    }
}

/// Exact discounted returns and gradients for several reward streams in one pass.
pub fn exact_values(
    mdp: &TabularMdp,
    policy: &TabularSoftmaxPolicy,
    params: &[f64],
    horizon: usize,
    gamma: f64,
    targets: &[RewardTarget],
) -> Result<ExactValues> {
    mdp.check_enumerable(horizon)?;
    policy.check_compatible(mdp)?;
    policy.check_params(params)?;
    let dim = policy.dim();
    let n_states = mdp.n_states();
    let joint = mdp.joint_action_count();
    let joint_probs = policy.joint_probabilities(params);
    let scores = (0..n_states)
        .map(|s| {
            (0..joint)
                .map(|j| policy.grad_log_prob(params, &s, &mdp.decode_joint(j)))
                .collect()
        })
        .collect();
    let rewards = (0..n_states)
        .map(|s| {
            (0..joint)
                .map(|j| {
                    targets
                        .iter()
                        .map(|t| match *t {
                            RewardTarget::Agent(i) => mdp.reward(i, s, j),
                            RewardTarget::Collective => {
                                (0..mdp.action_counts().len()).map(|i| mdp.reward(i, s, j)).sum()
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut walk = Walk {
        mdp,
        horizon,
        gamma,
        targets,
        joint_probs,
        scores,
        rewards,
        score_stack: vec![ParamVector::zeros(dim); horizon + 1],
        return_stack: vec![vec![0.0; targets.len()]; horizon + 1],
        out: ExactValues {
            returns: vec![0.0; targets.len()],
            gradients: vec![ParamVector::zeros(dim); targets.len()],
            mass: 0.0,
        },
    };
    debug_assert_eq!(walk.targets.len(), walk.out.returns.len());
    for s0 in 0..n_states {
        let p0 = mdp.initial()[s0];
        if p0 > 0.0 {
            walk.descend(0, s0, p0, 1.0);
        }
    }
    Ok(walk.out)
}

/// Exact `∇J_i(θ)` (or `∇J(θ)` for the collective reward).
pub fn exact_gradient(
    mdp: &TabularMdp,
    policy: &TabularSoftmaxPolicy,
    params: &[f64],
    horizon: usize,
    gamma: f64,
    target: RewardTarget,
) -> Result<ParamVector> {
    let mut v = exact_values(mdp, policy, params, horizon, gamma, &[target])?;
    Ok(v.gradients.pop().expect("one target"))
}

/// Exact `J_i(θ)` (or `J(θ)` for the collective reward).
pub fn exact_return(
    mdp: &TabularMdp,
    policy: &TabularSoftmaxPolicy,
    params: &[f64],
    horizon: usize,
    gamma: f64,
    target: RewardTarget,
) -> Result<f64> {
    Ok(exact_values(mdp, policy, params, horizon, gamma, &[target])?.returns[0])
}

/// Largest absolute gap between [`exact_gradient`] and central differences of
/// [`exact_return`] with step `h`.
pub fn gradient_fd_gap(
    mdp: &TabularMdp,
    policy: &TabularSoftmaxPolicy,
    params: &[f64],
    horizon: usize,
    gamma: f64,
    target: RewardTarget,
    h: f64,
) -> Result<f64> {
    let grad = exact_gradient(mdp, policy, params, horizon, gamma, target)?;
    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for j in 0..params.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let plus = exact_return(mdp, policy, &probe, horizon, gamma, target)?;
        probe[j] = orig - h;
        let minus = exact_return(mdp, policy, &probe, horizon, gamma, target)?;
        probe[j] = orig;
        worst = worst.max((grad[j] - (plus - minus) / (2.0 * h)).abs());
    }
    Ok(worst)
}
