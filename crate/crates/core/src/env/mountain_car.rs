use std::f64::consts::PI;

use rand::Rng;

use super::{Environment, StepResult};
use crate::error::{Error, Result};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.45;
const POWER: f64 = 0.0015;
const GRAVITY: f64 = 0.0025;
const ENERGY_COST: f64 = 0.1;
const GOAL_BONUS: f64 = 100.0;

/// Joint state of all cars, interleaved as `[p_0, v_0, p_1, v_1, ...]` so it can be fed
/// to a policy without copying.
#[derive(Debug, Clone, PartialEq)]
pub struct CarsState {
    values: Vec<f64>,
}

impl CarsState {
    pub fn new(positions: &[f64], velocities: &[f64]) -> Self {
        assert_eq!(positions.len(), velocities.len());
        let values = positions.iter().zip(velocities).flat_map(|(&p, &v)| [p, v]).collect();
        Self { values }
    }

    pub fn n_cars(&self) -> usize {
        self.values.len() / 2
    }

    pub fn position(&self, i: usize) -> f64 {
        self.values[2 * i]
    }

    pub fn velocity(&self, i: usize) -> f64 {
        self.values[2 * i + 1]
    }

    pub fn features(&self) -> &[f64] {
        &self.values
    }
}

/// `n` independent continuous mountain cars sharing one global observation.
///
/// A car that has reached its goal stays frozen and earns nothing further, so every
/// episode runs for the full horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct MountainCar {
    goals: Vec<f64>,
}

impl MountainCar {
    pub fn new(n_agents: usize) -> Self {
        Self { goals: vec![GOAL_POSITION; n_agents] }
    }

    pub fn with_goals(goals: Vec<f64>) -> Result<Self> {
        if goals.is_empty() {
            return Err(Error::InvalidConfig("mountain car needs at least one agent".into()));
        }
        if let Some(g) = goals.iter().find(|g| !(**g > MIN_POSITION && **g <= MAX_POSITION)) {
            return Err(Error::InvalidConfig(format!(
                "goal position {g} outside ({MIN_POSITION}, {MAX_POSITION}]"
            )));
        }
        Ok(Self { goals })
    }

    pub fn goals(&self) -> &[f64] {
        &self.goals
    }

    pub fn reached(&self, state: &CarsState, i: usize) -> bool {
        state.position(i) >= self.goals[i]
    }
}

impl Environment for MountainCar {
    type State = CarsState;
    type Action = Vec<f64>;

    fn n_agents(&self) -> usize {
        self.goals.len()
    }

    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> CarsState {
        let positions: Vec<f64> =
            (0..self.goals.len()).map(|_| rng.random_range(-0.6..=-0.4)).collect();
        CarsState::new(&positions, &vec![0.0; positions.len()])
    }

    fn step<R: Rng + ?Sized>(
        &self,
        state: &CarsState,
        action: &Vec<f64>,
        _rng: &mut R,
    ) -> Result<StepResult<CarsState>> {
        let n = self.goals.len();
        if action.len() != n || state.n_cars() != n {
            return Err(Error::Shape(format!(
                "expected {n} cars and actions, got {} and {}",
                state.n_cars(),
                action.len()
            )));
        }
        if let Some(a) = action.iter().find(|a| !(-1.0..=1.0).contains(*a)) {
            return Err(Error::ActionOutOfRange(format!("power {a} outside [-1, 1]")));
        }
        let mut positions = Vec::with_capacity(n);
        let mut velocities = Vec::with_capacity(n);
        let mut rewards = Vec::with_capacity(n);
        let mut terminal = Vec::with_capacity(n);
        for (i, &a) in action.iter().enumerate() {
            let (p, v) = (state.position(i), state.velocity(i));
            if p >= self.goals[i] {
                positions.push(p);
                velocities.push(v);
                rewards.push(0.0);
                terminal.push(true);
                continue;
            }
            let mut v = (v + POWER * a - GRAVITY * (3.0 * p).cos()).clamp(-MAX_SPEED, MAX_SPEED);
            let p = (p + v).clamp(MIN_POSITION, MAX_POSITION);
            if p == MIN_POSITION && v < 0.0 {
                v = 0.0;
            }
            let done = p >= self.goals[i];
            let mut r = -ENERGY_COST * a * a;
            if done {
                r += GOAL_BONUS;
            }
            positions.push(p);
            velocities.push(v);
            rewards.push(r);
            terminal.push(done);
        }
        Ok(StepResult { next_state: CarsState::new(&positions, &velocities), rewards, terminal })
    }

    fn project_action(&self, action: &Vec<f64>) -> Vec<f64> {
        action.iter().map(|a| a.clamp(-1.0, 1.0)).collect()
    }
}

/// Position where gravity vanishes (`cos(3p) = 0`), useful for fixed-point checks.
pub fn zero_gravity_position() -> f64 {
    -PI / 6.0
}
