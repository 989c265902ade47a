use rand::Rng;

use super::Policy;
use crate::env::TabularMdp;
use crate::error::{Error, Result};
use crate::params::{ParamLayout, ParamVector};

/// Per-agent softmax over a logit table: `π_i(a|s) ∝ exp θ_i[s][a]`.
#[derive(Debug, Clone)]
pub struct TabularSoftmaxPolicy {
    n_states: usize,
    action_counts: Vec<usize>,
    layout: ParamLayout,
}

impl TabularSoftmaxPolicy {
    pub fn new(n_states: usize, action_counts: Vec<usize>) -> Self {
        let sizes: Vec<usize> = action_counts.iter().map(|&a| n_states * a).collect();
        Self { n_states, action_counts, layout: ParamLayout::from_sizes(&sizes) }
    }

    pub fn for_mdp(mdp: &TabularMdp) -> Self {
        Self::new(mdp.n_states(), mdp.action_counts().to_vec())
    }

    pub fn check_compatible(&self, mdp: &TabularMdp) -> Result<()> {
        if self.n_states != mdp.n_states() || self.action_counts != mdp.action_counts() {
            return Err(Error::Shape("tabular policy does not match the MDP".into()));
        }
        Ok(())
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    /// Offset of logit `θ_i[s][a]` in the flat parameter vector.
    pub fn index(&self, agent: usize, state: usize, action: usize) -> usize {
        self.layout.agent(agent).start + state * self.action_counts[agent] + action
    }

    fn logits<'a>(&self, params: &'a [f64], agent: usize, state: usize) -> &'a [f64] {
        let start = self.index(agent, state, 0);
        &params[start..start + self.action_counts[agent]]
    }

    /// `π_i(·|s)`
    pub fn probabilities(&self, params: &[f64], agent: usize, state: usize) -> Vec<f64> {
        let logits = self.logits(params, agent, state);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exps.iter().sum();
        exps.into_iter().map(|e| e / z).collect()
    }

    fn log_softmax(&self, params: &[f64], agent: usize, state: usize, action: usize) -> f64 {
        let logits = self.logits(params, agent, state);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        logits[action] - lse
    }

    /// Joint action probabilities `π(j|s)` indexed `[s][joint]` with the MDP's joint encoding.
    pub fn joint_probabilities(&self, params: &[f64]) -> Vec<Vec<f64>> {
        let joint: usize = self.action_counts.iter().product();
        (0..self.n_states)
            .map(|s| {
                let per_agent: Vec<Vec<f64>> =
                    (0..self.action_counts.len()).map(|i| self.probabilities(params, i, s)).collect();
                (0..joint)
                    .map(|mut j| {
                        let mut p = 1.0;
                        for (i, &c) in self.action_counts.iter().enumerate() {
                            p *= per_agent[i][j % c];
                            j /= c;
                        }
                        p
                    })
                    .collect()
            })
            .collect()
    }
}

impl Policy<usize, Vec<usize>> for TabularSoftmaxPolicy {
    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        (0..self.layout.dim()).map(|_| rng.random_range(-0.1..=0.1)).collect::<Vec<_>>().into()
    }

    fn sample<R: Rng + ?Sized>(&self, params: &[f64], state: &usize, rng: &mut R) -> Vec<usize> {
        (0..self.action_counts.len())
            .map(|i| crate::env::sample_index(&self.probabilities(params, i, *state), rng))
            .collect()
    }

    fn act<R: Rng + ?Sized>(&self, params: &[f64], state: &usize, rng: &mut R) -> Result<Vec<usize>> {
        self.check_params(params)?;
        if *state >= self.n_states {
            return Err(Error::Shape(format!("state {state} >= {}", self.n_states)));
        }
        Ok(self.sample(params, state, rng))
    }

    fn log_prob(&self, params: &[f64], state: &usize, action: &Vec<usize>) -> f64 {
        action.iter().enumerate().map(|(i, &a)| self.log_softmax(params, i, *state, a)).sum()
    }

    fn add_grad_log_prob(&self, params: &[f64], state: &usize, action: &Vec<usize>, scale: f64, out: &mut [f64]) {
        for (i, &a) in action.iter().enumerate() {
            let probs = self.probabilities(params, i, *state);
            let start = self.index(i, *state, 0);
            for (k, p) in probs.iter().enumerate() {
                let indicator = if k == a { 1.0 } else { 0.0 };
                out[start + k] += scale * (indicator - p);
            }
        }
    }
}
