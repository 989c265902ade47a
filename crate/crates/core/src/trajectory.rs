/// One sampled episode: `H+1` states, `H` joint actions and an `H × n` reward table.
///
/// Actions are stored exactly as the policy sampled them. Environments may clamp
/// them before use, but likelihoods are always evaluated on the stored values.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<S, A> {
    pub states: Vec<S>,
    pub actions: Vec<A>,
    pub rewards: Vec<Vec<f64>>,
}

impl<S, A> Trajectory<S, A> {
    pub fn horizon(&self) -> usize {
        self.actions.len()
    }

    pub fn is_consistent(&self) -> bool {
        self.states.len() == self.actions.len() + 1 && self.rewards.len() == self.actions.len()
    }

    /// Reward of agent `i` (or the sum over agents) at step `h`.
    pub fn reward(&self, h: usize, target: RewardTarget) -> f64 {
        match target {
            RewardTarget::Agent(i) => self.rewards[h][i],
            RewardTarget::Collective => self.rewards[h].iter().sum(),
        }
    }

    /// `Σ_h γ^h r^h` for the chosen reward stream.
    pub fn discounted_return(&self, gamma: f64, target: RewardTarget) -> f64 {
        let mut discount = 1.0;
        let mut total = 0.0;
        for h in 0..self.horizon() {
            total += discount * self.reward(h, target);
            discount *= gamma;
        }
        total
    }
}

/// Which reward stream a gradient or return refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RewardTarget {
    /// Agent `i`'s private reward `R_i`.
    Agent(usize),
    /// The sum of all agents' rewards.
    Collective,
}
