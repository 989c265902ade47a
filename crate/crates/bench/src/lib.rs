//! Shared fixtures for the kernel benchmarks.

use dgtpg::env::{MountainCar, TabularMdp};
use dgtpg::estimator::{sample_trajectories, EstimatorSettings};
use dgtpg::graph::{build_topology, metropolis_weights, MixingMatrix, TopologyKind};
use dgtpg::optimizer::RunState;
use dgtpg::params::ParamVector;
use dgtpg::policy::{GaussianPolicy, Policy, TabularSoftmaxPolicy};
use dgtpg::trajectory::Trajectory;
use dgtpg::CarsState;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const SEED: u64 = 7;

pub fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(SEED)
}

/// Tabular oracle MDP with random parameters.
pub struct TabularFixture {
    pub mdp: TabularMdp,
    pub policy: TabularSoftmaxPolicy,
    pub theta: Vec<f64>,
    pub theta_ref: Vec<f64>,
}

impl TabularFixture {
    pub fn new(agents: usize) -> Self {
        let mdp = TabularMdp::oracle(agents);
        let policy = TabularSoftmaxPolicy::for_mdp(&mdp);
        let mut r = rng();
        let theta: Vec<f64> = (0..policy.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
        let theta_ref = theta.iter().map(|x| x + r.random_range(-0.1..0.1)).collect();
        Self { mdp, policy, theta, theta_ref }
    }
}

/// Multi-car MountainCar with an MLP policy and a sampled batch.
pub struct MountainCarFixture {
    pub env: MountainCar,
    pub policy: GaussianPolicy,
    pub settings: EstimatorSettings,
    pub horizon: usize,
    pub theta: Vec<f64>,
    pub theta_ref: Vec<f64>,
    pub batch: Vec<Trajectory<CarsState, Vec<f64>>>,
}

impl MountainCarFixture {
    pub fn new(agents: usize, hidden: usize, horizon: usize, batch: usize) -> Self {
        let env = MountainCar::new(agents);
        let policy = GaussianPolicy::mlp(agents, 2 * agents, hidden, 0.5);
        let mut r = rng();
        let theta = Policy::<CarsState, Vec<f64>>::init_params(&policy, &mut r).into_vec();
        let theta_ref = theta.iter().map(|x| x + r.random_range(-0.01..0.01)).collect();
        let batch = sample_trajectories(&env, &policy, &theta, batch, horizon, &mut r).expect("rollouts");
        Self { env, policy, settings: EstimatorSettings::new(0.99), horizon, theta, theta_ref, batch }
    }
}

pub fn mixing(kind: TopologyKind, n: usize) -> MixingMatrix {
    metropolis_weights(&build_topology(kind, n, None).expect("topology")).expect("weights")
}

/// A run state with random parameters and trackers on `n` agents.
pub fn run_state(kind: TopologyKind, n: usize, dim: usize) -> RunState {
    let mut r = rng();
    let mut stack = || (0..n).map(|_| ParamVector::from_vec((0..dim).map(|_| r.random_range(-1.0..1.0)).collect())).collect::<Vec<_>>();
    let (thetas, ys, vs) = (stack(), stack(), stack());
    RunState::from_parts(mixing(kind, n), thetas, ys, vs, SEED, None).expect("run state")
}
