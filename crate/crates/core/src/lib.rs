//! Decentralized policy gradient with SVRG variance reduction and gradient tracking.
//!
//! `n` cooperative agents each keep a copy of the joint-policy parameters, estimate
//! their local policy gradient from their own rollouts, and exchange parameters and
//! gradient trackers with graph neighbours through a doubly stochastic mixing matrix.
//!
//! The crate provides the environments, policies, estimators, the optimizer with its
//! two baselines, closed-form evaluators for the convergence constants, and the
//! experiment harness used by the `dgtpg` command-line tool.

pub mod bounds;
pub mod env;
pub mod error;
pub mod estimator;
pub mod graph;
pub mod harness;
pub mod optimizer;
pub mod oracle;
pub mod params;
pub mod policy;
pub mod trajectory;

pub use env::{CarsState, Environment, MountainCar, StepResult, TabularMdp, TabularSpec};
pub use error::{Error, Result};
pub use graph::{build_topology, metropolis_weights, spectral_gap, MixingMatrix, Topology, TopologyKind};
pub use optimizer::{AlgoConfig, RunOutput, RunState, Variant};
pub use params::{ParamLayout, ParamVector};
pub use policy::{GaussianPolicy, MeanModel, Policy, TabularSoftmaxPolicy};
pub use trajectory::{RewardTarget, Trajectory};
