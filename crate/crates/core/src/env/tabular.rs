use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Environment, StepResult};
use crate::error::{Error, Result};
use crate::policy::TabularSoftmaxPolicy;
use crate::trajectory::Trajectory;

/// Upper bound on the number of trajectories [`TabularMdp::enumerate_trajectories`] will expand.
pub const ENUMERATION_LIMIT: f64 = 1e6;

const PROB_TOL: f64 = 1e-12;

// Oracle MDP rewards.
const HARVEST_STOCKED: f64 = 3.0;
const WAIT_STOCKED: f64 = 1.5;
const STAY_DEPLETED: f64 = 0.9;

/// On-disk description of a tabular multi-agent MDP.
///
/// Joint actions are indexed in mixed radix with agent 0 as the least significant digit:
/// `joint = a_0 + A_0 * (a_1 + A_1 * (a_2 + ...))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularSpec {
    pub states: usize,
    pub actions: Vec<usize>,
    pub initial: Vec<f64>,
    /// `transitions[s][joint][s']`
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// `rewards[agent][s][joint]`
    pub rewards: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

/// Finite-state multi-agent MDP whose trajectory distribution can be enumerated exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    action_counts: Vec<usize>,
    joint_actions: usize,
    initial: Vec<f64>,
    transitions: Vec<Vec<Vec<f64>>>,
    rewards: Vec<Vec<Vec<f64>>>,
    gamma: f64,
    horizon: usize,
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Tabular(format!("{what} has a negative or non-finite entry")));
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::Tabular(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(spec: TabularSpec, gamma: f64, horizon: usize) -> Result<Self> {
        let TabularSpec { states, actions, initial, transitions, rewards, .. } = spec;
        if states == 0 || actions.is_empty() || actions.contains(&0) {
            return Err(Error::Tabular("need at least one state, agent and action".into()));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Tabular(format!("gamma {gamma} outside (0, 1)")));
        }
        if horizon == 0 {
            return Err(Error::Tabular("horizon must be at least 1".into()));
        }
        let joint: usize = actions.iter().product();
        if initial.len() != states {
            return Err(Error::Tabular("initial distribution length != state count".into()));
        }
        check_distribution(&initial, "initial distribution")?;
        if transitions.len() != states || transitions.iter().any(|t| t.len() != joint) {
            return Err(Error::Tabular(format!("transitions must be {states} x {joint} x {states}")));
        }
        for (s, per_action) in transitions.iter().enumerate() {
            for (a, row) in per_action.iter().enumerate() {
                if row.len() != states {
                    return Err(Error::Tabular(format!("transition row ({s},{a}) has wrong length")));
                }
                check_distribution(row, &format!("P(.|{s},{a})"))?;
            }
        }
        if rewards.len() != actions.len()
            || rewards.iter().any(|r| r.len() != states || r.iter().any(|row| row.len() != joint))
        {
            return Err(Error::Tabular(format!(
                "rewards must be {} x {states} x {joint}",
                actions.len()
            )));
        }
        if rewards.iter().flatten().flatten().any(|r| !r.is_finite()) {
            return Err(Error::Tabular("non-finite reward".into()));
        }
        Ok(Self {
            n_states: states,
            action_counts: actions,
            joint_actions: joint,
            initial,
            transitions,
            rewards,
            gamma,
            horizon,
        })
    }

    /// Parses a JSON description. `gamma`/`horizon` in the file take precedence over the defaults.
    pub fn from_json(text: &str, default_gamma: f64, default_horizon: usize) -> Result<Self> {
        let spec: TabularSpec = serde_json::from_str(text)?;
        let gamma = spec.gamma.unwrap_or(default_gamma);
        let horizon = spec.horizon.unwrap_or(default_horizon);
        Self::new(spec, gamma, horizon)
    }

    pub fn to_spec(&self) -> TabularSpec {
        TabularSpec {
            states: self.n_states,
            actions: self.action_counts.clone(),
            initial: self.initial.clone(),
            transitions: self.transitions.clone(),
            rewards: self.rewards.clone(),
            gamma: Some(self.gamma),
            horizon: Some(self.horizon),
        }
    }

    /// The two-state, two-actions-per-agent, horizon-3 MDP used as the exact-gradient
    /// test bed: a shared renewable resource. State 0 is stocked, state 1 depleted;
    /// action 1 harvests. Harvesting a stocked resource pays more than waiting but makes
    /// depletion likely, so the best stationary policy harvests only sometimes. In the
    /// depleted state there is nothing to harvest and actions have no effect.
    pub fn oracle(n_agents: usize) -> Self {
        assert!(n_agents >= 1);
        let n = n_agents;
        let actions = vec![2; n];
        let joint = 1usize << n;
        let decode = |j: usize| (0..n).map(|i| (j >> i) & 1).collect::<Vec<_>>();
        let mut transitions = vec![vec![vec![0.0; 2]; joint]; 2];
        for (s, per_action) in transitions.iter_mut().enumerate() {
            for (j, row) in per_action.iter_mut().enumerate() {
                let share = decode(j).iter().filter(|&&a| a == 1).count() as f64 / n as f64;
                let depleted = if s == 0 { 0.05 + 0.9 * share } else { STAY_DEPLETED };
                row[1] = depleted;
                row[0] = 1.0 - depleted;
            }
        }
        let rewards = (0..n)
            .map(|i| {
                (0..2)
                    .map(|s| {
                        (0..joint)
                            .map(|j| match (s, decode(j)[i] == 1) {
                                (0, true) => HARVEST_STOCKED,
                                (0, false) => WAIT_STOCKED,
                                _ => 0.0,
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let spec = TabularSpec {
            states: 2,
            actions,
            initial: vec![0.6, 0.4],
            transitions,
            rewards,
            gamma: None,
            horizon: None,
        };
        Self::new(spec, 0.9, 3).expect("oracle MDP is well formed")
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn action_counts(&self) -> &[usize] {
        &self.action_counts
    }

    pub fn joint_action_count(&self) -> usize {
        self.joint_actions
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn with_gamma_horizon(mut self, gamma: f64, horizon: usize) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(Error::Tabular(format!("gamma {gamma} outside (0, 1)")));
        }
        if horizon == 0 {
            return Err(Error::Tabular("horizon must be at least 1".into()));
        }
        self.gamma = gamma;
        self.horizon = horizon;
        Ok(self)
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition(&self, s: usize, joint: usize) -> &[f64] {
        &self.transitions[s][joint]
    }

    pub fn reward(&self, agent: usize, s: usize, joint: usize) -> f64 {
        self.rewards[agent][s][joint]
    }

    pub fn joint_index(&self, action: &[usize]) -> usize {
        let mut idx = 0;
        for (a, count) in action.iter().zip(&self.action_counts).rev() {
            idx = idx * count + a;
        }
        idx
    }

    pub fn decode_joint(&self, mut idx: usize) -> Vec<usize> {
        self.action_counts
            .iter()
            .map(|&c| {
                let a = idx % c;
                idx /= c;
                a
            })
            .collect()
    }

    /// Worst-case number of trajectories of length `horizon`.
    pub fn enumeration_size(&self, horizon: usize) -> f64 {
        (self.n_states as f64).powi(horizon as i32 + 1)
            * (self.joint_actions as f64).powi(horizon as i32)
    }

    pub fn check_enumerable(&self, horizon: usize) -> Result<()> {
        let paths = self.enumeration_size(horizon);
        if paths > ENUMERATION_LIMIT {
            return Err(Error::EnumerationTooLarge { paths, limit: ENUMERATION_LIMIT });
        }
        Ok(())
    }

    /// Every trajectory with nonzero probability under the policy, with its probability.
    pub fn enumerate_trajectories(
        &self,
        policy: &TabularSoftmaxPolicy,
        params: &[f64],
        horizon: usize,
    ) -> Result<Vec<(Trajectory<usize, Vec<usize>>, f64)>> {
        self.check_enumerable(horizon)?;
        policy.check_compatible(self)?;
        let probs = policy.joint_probabilities(params);
        let mut out = Vec::new();
        let mut states = Vec::with_capacity(horizon + 1);
        let mut actions = Vec::with_capacity(horizon);
        for s0 in 0..self.n_states {
            let p0 = self.initial[s0];
            if p0 == 0.0 {
                continue;
            }
            states.push(s0);
            self.expand(&probs, horizon, p0, &mut states, &mut actions, &mut out);
            states.pop();
        }
        Ok(out)
    }

    fn expand(
        &self,
        probs: &[Vec<f64>],
        horizon: usize,
        prob: f64,
        states: &mut Vec<usize>,
        actions: &mut Vec<usize>,
        out: &mut Vec<(Trajectory<usize, Vec<usize>>, f64)>,
    ) {
        if actions.len() == horizon {
            let traj = Trajectory {
                states: states.clone(),
                actions: actions.iter().map(|&j| self.decode_joint(j)).collect(),
                rewards: states
                    .iter()
                    .zip(actions.iter())
                    .map(|(&s, &j)| (0..self.action_counts.len()).map(|i| self.reward(i, s, j)).collect())
                    .collect(),
            };
            out.push((traj, prob));
            return;
        }
        let s = *states.last().expect("path starts with a state");
        for (j, &pa) in probs[s].iter().enumerate() {
            if pa == 0.0 {
                continue;
            }
            actions.push(j);
            for (next, &pt) in self.transitions[s][j].iter().enumerate() {
                if pt == 0.0 {
                    continue;
                }
                states.push(next);
                self.expand(probs, horizon, prob * pa * pt, states, actions, out);
                states.pop();
            }
            actions.pop();
        }
    }
}

fn sample_categorical<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_nonzero = 0;
    for (i, &pi) in p.iter().enumerate() {
        if pi > 0.0 {
            last_nonzero = i;
            acc += pi;
            if u < acc {
                return i;
            }
        }
    }
    last_nonzero
}

pub(crate) fn sample_index<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> usize {
    sample_categorical(p, rng)
}

impl Environment for TabularMdp {
    type State = usize;
    type Action = Vec<usize>;

    fn n_agents(&self) -> usize {
        self.action_counts.len()
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        sample_categorical(&self.initial, rng)
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &usize,
        action: &Vec<usize>,
        rng: &mut R,
    ) -> Result<StepResult<usize>> {
        if *state >= self.n_states {
            return Err(Error::Shape(format!("state {state} >= {}", self.n_states)));
        }
        if action.len() != self.action_counts.len() {
            return Err(Error::Shape(format!(
                "joint action has {} components, expected {}",
                action.len(),
                self.action_counts.len()
            )));
        }
        if let Some((i, a)) = action.iter().enumerate().find(|(i, a)| **a >= self.action_counts[*i]) {
            return Err(Error::ActionOutOfRange(format!("agent {i} action {a}")));
        }
        let j = self.joint_index(action);
        let next = sample_categorical(&self.transitions[*state][j], rng);
        let rewards = (0..self.action_counts.len()).map(|i| self.reward(i, *state, j)).collect();
        Ok(StepResult { next_state: next, rewards, terminal: vec![false; self.action_counts.len()] })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain() -> TabularMdp {
        // P(1|0,a) = 1, state 1 absorbing, single agent with two actions.
        let spec = TabularSpec {
            states: 2,
            actions: vec![2],
            initial: vec![1.0, 0.0],
            transitions: vec![vec![vec![0.0, 1.0]; 2], vec![vec![0.0, 1.0]; 2]],
            rewards: vec![vec![vec![1.0, 0.0], vec![0.0, 0.0]]],
            gamma: None,
            horizon: None,
        };
        TabularMdp::new(spec, 0.9, 2).unwrap()
    }

    #[test]
    fn point_mass_reset() {
        let mdp = chain();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!((0..100).all(|_| mdp.reset(&mut rng) == 0));
    }

    #[test]
    fn deterministic_transition() {
        let mdp = chain();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for a in 0..2 {
            let out = mdp.step(&0, &vec![a], &mut rng).unwrap();
            assert_eq!(out.next_state, 1);
        }
    }

    #[test]
    fn uniform_initial_frequency() {
        let mut spec = chain().to_spec();
        spec.initial = vec![0.5, 0.5];
        let mdp = TabularMdp::new(spec, 0.9, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let draws = 100_000;
        let zeros = (0..draws).filter(|_| mdp.reset(&mut rng) == 0).count();
        let freq = zeros as f64 / draws as f64;
        assert!((freq - 0.5).abs() <= 0.005, "frequency {freq}");
    }

    #[test]
    fn joint_index_round_trip() {
        let mdp = TabularMdp::oracle(3);
        for j in 0..mdp.joint_action_count() {
            assert_eq!(mdp.joint_index(&mdp.decode_joint(j)), j);
        }
        assert_eq!(mdp.joint_index(&[1, 0, 0]), 1);
        assert_eq!(mdp.joint_index(&[0, 1, 0]), 2);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = chain().to_spec();
        spec.transitions[0][0] = vec![0.5, 0.6];
        assert!(TabularMdp::new(spec, 0.9, 2).is_err());
        let spec = chain().to_spec();
        assert!(TabularMdp::new(spec.clone(), 1.0, 2).is_err());
        assert!(TabularMdp::new(spec, 0.9, 0).is_err());
    }

    #[test]
    fn rejects_out_of_range_action() {
        let mdp = chain();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(mdp.step(&0, &vec![2], &mut rng), Err(Error::ActionOutOfRange(_))));
    }

    #[test]
    fn json_round_trip() {
        let mdp = TabularMdp::oracle(2);
        let text = serde_json::to_string(&mdp.to_spec()).unwrap();
        let back = TabularMdp::from_json(&text, 0.5, 7).unwrap();
        assert_eq!(back, mdp);
    }

    #[test]
    fn oracle_rows_are_stochastic() {
        let mdp = TabularMdp::oracle(3);
        for s in 0..2 {
            for j in 0..mdp.joint_action_count() {
                let sum: f64 = mdp.transition(s, j).iter().sum();
                assert!((sum - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn enumeration_guard() {
        let mdp = TabularMdp::oracle(3);
        let policy = TabularSoftmaxPolicy::for_mdp(&mdp);
        let params = vec![0.0; 12];
        assert!(matches!(
            mdp.enumerate_trajectories(&policy, &params, 8),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }
}
