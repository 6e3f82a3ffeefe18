//! Seeded, deterministic Markov-game simulators.
//!
//! Four environments: the Modified Prisoner's Dilemma matrix game, two
//! analytic toy games (a reward allocator and a termination toy) whose exact
//! values are known in closed form, and desk-scale versions of the Eldorado
//! survival game and the Harvest social dilemma.
//!
//! All environments implement [`Environment`]: they own their state, expose
//! per-agent observations plus a global state vector for centralized
//! critics, and are bit-deterministic given a seed and an action sequence.

mod allocator;
mod eldorado;
mod harvest;
mod matrix_game;
mod termination;

pub use allocator::{enumerate_allocator_outcomes, AllocatorEnv, AllocatorOutcome, ToyAllocatorState};
pub use eldorado::{EldoradoConfig, EldoradoEnv, EldoradoState};
pub use harvest::{HarvestConfig, HarvestEnv, HarvestState};
pub use matrix_game::MatrixGameSpec;
pub use termination::{termination_toy_values, TerminationToyEnv, TerminationToyValues};

use crate::welfare::PayoffVector;

/// Everything one environment step produces.
#[derive(Debug, Clone)]
pub struct StepResult {
    /// Per-agent rewards for this step.
    pub rewards: PayoffVector,
    /// Global state features after the step (for centralized critics and
    /// mixing hypernetworks).
    pub global_state: Vec<f64>,
    /// Per-agent observations after the step. Terminated agents in
    /// respawning environments observe their fresh spawn here.
    pub observations: Vec<Vec<f64>>,
    /// True for agents whose life ended on this step (value bootstraps must
    /// be cut even when the agent respawns immediately).
    pub terminated: Vec<bool>,
    /// True when the episode is over and the environment needs a reset.
    pub done: bool,
}

/// Common interface of all simulators.
pub trait Environment {
    /// Number of agents (constant every step; respawning keeps it so).
    fn num_agents(&self) -> usize;

    /// Size of `agent`'s discrete action set.
    fn num_actions(&self, agent: usize) -> usize;

    /// Width of every per-agent observation vector.
    fn obs_width(&self) -> usize;

    /// Width of the global state vector.
    fn state_width(&self) -> usize;

    /// Episode length in steps.
    fn horizon(&self) -> usize;

    /// Restarts the episode; deterministic for a given seed. Returns the
    /// initial per-agent observations.
    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>>;

    /// Advances one step with one action per agent.
    ///
    /// Panics if an action is outside the agent's action set.
    fn step(&mut self, joint_action: &[usize]) -> StepResult;

    /// Observation of one agent in the current state.
    fn observe(&self, agent: usize) -> Vec<f64>;

    /// Global state features of the current state.
    fn global_state(&self) -> Vec<f64>;

    /// Per-agent increments of the environment's headline score for the
    /// last step: apples collected in Harvest, first-life survival
    /// indicators in Eldorado (their episode sum is the lifetime metric).
    /// Zero for environments without a score beyond the rewards.
    fn metric_delta(&self) -> Vec<f64> {
        vec![0.0; self.num_agents()]
    }
}
