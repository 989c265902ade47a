//! Environments: the multi-car MountainCar and enumerable tabular MDPs.

mod mountain_car;
mod tabular;

pub use mountain_car::{CarsState, MountainCar, GOAL_POSITION, MAX_POSITION, MAX_SPEED, MIN_POSITION, zero_gravity_position};
pub use tabular::{TabularMdp, TabularSpec, ENUMERATION_LIMIT};
pub(crate) use tabular::sample_index;

use rand::Rng;

use crate::error::Result;

/// Outcome of one environment transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult<S> {
    pub next_state: S,
    pub rewards: Vec<f64>,
    pub terminal: Vec<bool>,
}

/// A cooperative multi-agent environment with a shared global state.
pub trait Environment: Sync {
    type State: Clone + Send + Sync + std::fmt::Debug;
    type Action: Clone + Send + Sync + std::fmt::Debug;

    fn n_agents(&self) -> usize;

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::State;

    /// Rejects actions outside the action space.
    fn step<R: Rng + ?Sized>(
        &self,
        state: &Self::State,
        action: &Self::Action,
        rng: &mut R,
    ) -> Result<StepResult<Self::State>>;

    /// Projects a policy sample onto the action space. Identity for discrete actions.
    fn project_action(&self, action: &Self::Action) -> Self::Action {
        action.clone()
    }
}
