use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::Policy;
use crate::env::CarsState;
use crate::params::{ParamLayout, ParamVector};

/// How each agent maps the global observation to its mean action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanModel {
    /// `μ_i(s) = w_iᵀ s`
    Linear,
    /// `μ_i(s) = w2ᵀ tanh(W1 s + b1) + b2`
    Mlp { hidden: usize },
}

/// Gaussian policy with a fixed standard deviation; one mean model per agent.
///
/// MLP block layout per agent: `W1` (row-major, `hidden × input`), `b1`, `w2`, `b2`.
#[derive(Debug, Clone)]
pub struct GaussianPolicy {
    input_dim: usize,
    model: MeanModel,
    std: f64,
    layout: ParamLayout,
}

impl GaussianPolicy {
    pub fn new(n_agents: usize, input_dim: usize, model: MeanModel, std: f64) -> Self {
        assert!(std > 0.0, "policy standard deviation must be positive");
        let block = match model {
            MeanModel::Linear => input_dim,
            MeanModel::Mlp { hidden } => hidden * input_dim + 2 * hidden + 1,
        };
        Self { input_dim, model, std, layout: ParamLayout::from_sizes(&vec![block; n_agents]) }
    }

    pub fn mlp(n_agents: usize, input_dim: usize, hidden: usize, std: f64) -> Self {
        Self::new(n_agents, input_dim, MeanModel::Mlp { hidden }, std)
    }

    pub fn linear(n_agents: usize, input_dim: usize, std: f64) -> Self {
        Self::new(n_agents, input_dim, MeanModel::Linear, std)
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn model(&self) -> MeanModel {
        self.model
    }

    /// Mean action of agent `i`.
    pub fn mean(&self, params: &[f64], agent: usize, x: &[f64]) -> f64 {
        let block = &params[self.layout.agent(agent)];
        match self.model {
            MeanModel::Linear => block.iter().zip(x).map(|(w, v)| w * v).sum(),
            MeanModel::Mlp { hidden } => {
                let d = self.input_dim;
                let (w1, rest) = block.split_at(hidden * d);
                let (b1, rest) = rest.split_at(hidden);
                let (w2, b2) = rest.split_at(hidden);
                let mut out = b2[0];
                for k in 0..hidden {
                    let z: f64 = b1[k] + w1[k * d..(k + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                    out += w2[k] * z.tanh();
                }
                out
            }
        }
    }

    /// `out[block_i] += scale · ∂μ_i/∂θ_i`
    fn add_mean_grad(&self, params: &[f64], agent: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let range = self.layout.agent(agent);
        let block = &params[range.clone()];
        let g = &mut out[range];
        match self.model {
            MeanModel::Linear => {
                for (gj, v) in g.iter_mut().zip(x) {
                    *gj += scale * v;
                }
            }
            MeanModel::Mlp { hidden } => {
                let d = self.input_dim;
                let (w1, rest) = block.split_at(hidden * d);
                let (b1, rest) = rest.split_at(hidden);
                let w2 = &rest[..hidden];
                let (gw1, grest) = g.split_at_mut(hidden * d);
                let (gb1, grest) = grest.split_at_mut(hidden);
                let (gw2, gb2) = grest.split_at_mut(hidden);
                gb2[0] += scale;
                for k in 0..hidden {
                    let z: f64 = b1[k] + w1[k * d..(k + 1) * d].iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                    let act = z.tanh();
                    gw2[k] += scale * act;
                    let dz = scale * w2[k] * (1.0 - act * act);
                    gb1[k] += dz;
                    for (gw, v) in gw1[k * d..(k + 1) * d].iter_mut().zip(x) {
                        *gw += dz * v;
                    }
                }
            }
        }
    }

    fn sample_features<R: Rng + ?Sized>(&self, params: &[f64], x: &[f64], rng: &mut R) -> Vec<f64> {
        (0..self.layout.n_agents())
            .map(|i| {
                let noise: f64 = rng.sample(StandardNormal);
                self.mean(params, i, x) + self.std * noise
            })
            .collect()
    }

    fn log_prob_features(&self, params: &[f64], x: &[f64], action: &[f64]) -> f64 {
        let norm = -0.5 * (2.0 * PI).ln() - self.std.ln();
        let var = self.std * self.std;
        action
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let diff = a - self.mean(params, i, x);
                norm - diff * diff / (2.0 * var)
            })
            .sum()
    }

    fn add_grad_features(&self, params: &[f64], x: &[f64], action: &[f64], scale: f64, out: &mut [f64]) {
        let var = self.std * self.std;
        for (i, a) in action.iter().enumerate() {
            let coeff = (a - self.mean(params, i, x)) / var;
            self.add_mean_grad(params, i, x, scale * coeff, out);
        }
    }

    fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let mut theta = ParamVector::zeros(self.layout.dim());
        if let MeanModel::Mlp { hidden } = self.model {
            let bound = 1.0 / (self.input_dim as f64).sqrt();
            for i in 0..self.layout.n_agents() {
                let start = self.layout.agent(i).start;
                // hidden weights and biases; the output layer stays zero
                for v in &mut theta[start..start + hidden * self.input_dim + hidden] {
                    *v = rng.random_range(-bound..=bound);
                }
            }
        }
        theta
    }
}

impl Policy<CarsState, Vec<f64>> for GaussianPolicy {
    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        self.init(rng)
    }

    fn sample<R: Rng + ?Sized>(&self, params: &[f64], state: &CarsState, rng: &mut R) -> Vec<f64> {
        self.sample_features(params, state.features(), rng)
    }

    fn log_prob(&self, params: &[f64], state: &CarsState, action: &Vec<f64>) -> f64 {
        self.log_prob_features(params, state.features(), action)
    }

    fn add_grad_log_prob(&self, params: &[f64], state: &CarsState, action: &Vec<f64>, scale: f64, out: &mut [f64]) {
        self.add_grad_features(params, state.features(), action, scale, out)
    }
}

/// Raw feature vectors, for policies used outside an environment.
impl Policy<Vec<f64>, Vec<f64>> for GaussianPolicy {
    fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        self.init(rng)
    }

    fn sample<R: Rng + ?Sized>(&self, params: &[f64], state: &Vec<f64>, rng: &mut R) -> Vec<f64> {
        self.sample_features(params, state, rng)
    }

    fn log_prob(&self, params: &[f64], state: &Vec<f64>, action: &Vec<f64>) -> f64 {
        self.log_prob_features(params, state, action)
    }

    fn add_grad_log_prob(&self, params: &[f64], state: &Vec<f64>, action: &Vec<f64>, scale: f64, out: &mut [f64]) {
        self.add_grad_features(params, state, action, scale, out)
    }
}
