//! Stochastic policies with exact score functions.
//!
//! Every agent holds a full copy of the joint-policy parameters; the joint policy
//! factorises as `π(a|s) = Π_i π_i(a_i|s)` and each factor reads only its own slice.

mod gaussian;
mod tabular;

pub use gaussian::{GaussianPolicy, MeanModel};
pub use tabular::TabularSoftmaxPolicy;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::{ParamLayout, ParamVector};

/// A parameterised joint policy over states `S` and joint actions `A`.
pub trait Policy<S, A>: Sync {
    fn layout(&self) -> &ParamLayout;

    fn dim(&self) -> usize {
        self.layout().dim()
    }

    fn n_agents(&self) -> usize {
        self.layout().n_agents()
    }

    fn init_params<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector;

    /// Samples every agent's action independently from its factor.
    fn sample<R: Rng + ?Sized>(&self, params: &[f64], state: &S, rng: &mut R) -> A;

    /// Joint log-likelihood `Σ_i log π_i(a_i|s)`.
    fn log_prob(&self, params: &[f64], state: &S, action: &A) -> f64;

    /// `out += scale · ∇_θ log π(a|s)`
    fn add_grad_log_prob(&self, params: &[f64], state: &S, action: &A, scale: f64, out: &mut [f64]);

    fn act<R: Rng + ?Sized>(&self, params: &[f64], state: &S, rng: &mut R) -> Result<A> {
        self.check_params(params)?;
        Ok(self.sample(params, state, rng))
    }

    fn grad_log_prob(&self, params: &[f64], state: &S, action: &A) -> ParamVector {
        let mut g = ParamVector::zeros(self.dim());
        self.add_grad_log_prob(params, state, action, 1.0, &mut g);
        g
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.dim() {
            return Err(Error::Shape(format!(
                "parameter vector has {} entries, policy expects {}",
                params.len(),
                self.dim()
            )));
        }
        if params.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("policy parameters".into()));
        }
        Ok(())
    }
}

/// Worst componentwise relative error between `grad_log_prob` and central differences
/// of `log_prob` with step `h`. The denominator is floored at 1 so that entries near zero
/// are compared absolutely.
pub fn finite_diff_check<S, A, P: Policy<S, A>>(
    policy: &P,
    params: &[f64],
    state: &S,
    action: &A,
    h: f64,
) -> f64 {
    assert!(h > 0.0, "finite-difference step must be positive");
    let analytic = policy.grad_log_prob(params, state, action);
    let mut probe = params.to_vec();
    let mut worst: f64 = 0.0;
    for j in 0..params.len() {
        let orig = probe[j];
        probe[j] = orig + h;
        let plus = policy.log_prob(&probe, state, action);
        probe[j] = orig - h;
        let minus = policy.log_prob(&probe, state, action);
        probe[j] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        let denom = analytic[j].abs().max(numeric.abs()).max(1.0);
        worst = worst.max((analytic[j] - numeric).abs() / denom);
    }
    worst
}
