//! Termination toy: two agents live for a fixed number of steps and receive
//! −1 when they die. No actions, no choices — just the bookkeeping needed to
//! contrast the two social value definitions around agent termination.
//!
//! The short-term social value accumulates the per-step welfare along an
//! agent's own experience, which ends at its own death; agent 1 therefore
//! never sees agent 2's later death, and its short-term social value is
//! −γ^{T₁} regardless of how long agent 2 survives. The long-term value
//! applies the welfare function to the agents' full discounted returns and
//! charges both deaths to everyone: −(γ^{T₁} + γ^{T₂}) with SW = sum.

use super::{Environment, StepResult};

/// The toy as an environment: agent i terminates at step Tᵢ with reward −1.
/// Each agent has a single no-op action.
#[derive(Debug, Clone)]
pub struct TerminationToyEnv {
    t1: usize,
    t2: usize,
    step: usize,
}

impl TerminationToyEnv {
    /// Requires 0 < T₁ < T₂.
    pub fn new(t1: usize, t2: usize) -> Self {
        assert!(0 < t1 && t1 < t2, "termination times must satisfy 0 < T1 < T2, got {t1}, {t2}");
        TerminationToyEnv { t1, t2, step: 0 }
    }

    fn encode(&self) -> Vec<f64> {
        vec![self.step as f64 / self.t2 as f64]
    }
}

impl Environment for TerminationToyEnv {
    fn num_agents(&self) -> usize {
        2
    }

    fn num_actions(&self, agent: usize) -> usize {
        assert!(agent < 2, "agent index {agent} out of range");
        1
    }

    fn obs_width(&self) -> usize {
        1
    }

    fn state_width(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        self.t2 + 1
    }

    fn reset(&mut self, _seed: u64) -> Vec<Vec<f64>> {
        self.step = 0;
        vec![self.encode(), self.encode()]
    }

    fn step(&mut self, joint_action: &[usize]) -> StepResult {
        assert_eq!(joint_action.len(), 2, "termination toy takes two actions");
        assert!(joint_action.iter().all(|&a| a == 0), "only the no-op action exists");
        assert!(self.step <= self.t2, "episode over; reset first");
        let t = self.step;
        self.step += 1;
        let rewards = vec![
            if t == self.t1 { -1.0 } else { 0.0 },
            if t == self.t2 { -1.0 } else { 0.0 },
        ];
        StepResult {
            rewards,
            global_state: self.encode(),
            observations: vec![self.encode(), self.encode()],
            terminated: vec![t >= self.t1, t >= self.t2],
            done: t == self.t2,
        }
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        assert!(agent < 2, "agent index {agent} out of range");
        self.encode()
    }

    fn global_state(&self) -> Vec<f64> {
        self.encode()
    }
}

/// Exact values of the termination toy (SW = sum).
#[derive(Debug, Clone)]
pub struct TerminationToyValues {
    /// Selfish values: V₁ = −γ^{T₁}, V₂ = −γ^{T₂}.
    pub v_selfish: [f64; 2],
    /// Short-term social values along each agent's own experience:
    /// agent 1 sees only its own death, agent 2 sees both.
    pub v_short: [f64; 2],
    /// Long-term social value SW(V₁, V₂), shared by both agents.
    pub v_long: f64,
}

/// Computes the toy's values by simulating the environment and discounting,
/// truncating each agent's social stream at its own termination.
pub fn termination_toy_values(t1: usize, t2: usize, gamma: f64) -> TerminationToyValues {
    assert!((0.0..1.0).contains(&gamma), "discount {gamma} outside [0, 1)");
    let mut env = TerminationToyEnv::new(t1, t2);
    env.reset(0);
    let mut v = [0.0, 0.0];
    let mut short = [0.0, 0.0];
    let mut alive = [true, true];
    let mut disc = 1.0;
    loop {
        let r = env.step(&[0, 0]);
        let sw: f64 = r.rewards.iter().sum();
        for i in 0..2 {
            if alive[i] {
                v[i] += disc * r.rewards[i];
                short[i] += disc * sw;
            }
        }
        for i in 0..2 {
            if r.terminated[i] {
                alive[i] = false;
            }
        }
        disc *= gamma;
        if r.done {
            break;
        }
    }
    TerminationToyValues { v_selfish: v, v_short: short, v_long: v[0] + v[1] }
}
