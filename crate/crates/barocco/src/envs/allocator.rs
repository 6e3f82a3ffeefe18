//! Toy reward allocator: a centralized controller hands out a positive
//! unitary reward twice, and handing it to the same agent again doubles the
//! second reward.
//!
//! The game exists because it separates the two definitions of social value.
//! With SW = min, every allocation looks equally (un)fair through the
//! short-term lens — some agent earns 0 every single step, so the per-step
//! minimum is always 0 — while the long-term lens (SW over discounted
//! returns) correctly prefers the alternating allocations, where both agents
//! end up with something.

use super::{Environment, StepResult};
use crate::welfare::{social_welfare, SWChoice};

/// State of the allocator: which decision we are at and who got the last
/// reward.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ToyAllocatorState {
    /// 0 before the first decision, 1 before the second, 2 when done.
    pub time_step: usize,
    /// Recipient of the previous reward, if any.
    pub last_rewarded: Option<usize>,
}

/// The allocator as a two-step environment. The controller's choice is agent
/// 0's action (0 = reward agent 0, 1 = reward agent 1); agent 1's action is
/// ignored. Rewards land on the two receiving agents.
#[derive(Debug, Clone)]
pub struct AllocatorEnv {
    state: ToyAllocatorState,
}

impl AllocatorEnv {
    pub fn new() -> Self {
        AllocatorEnv { state: ToyAllocatorState { time_step: 0, last_rewarded: None } }
    }

    /// Read-only view of the current state.
    pub fn state(&self) -> &ToyAllocatorState {
        &self.state
    }

    fn encode_state(&self) -> Vec<f64> {
        vec![
            if self.state.time_step == 0 { 1.0 } else { 0.0 },
            if self.state.time_step == 1 { 1.0 } else { 0.0 },
            if self.state.last_rewarded == Some(0) { 1.0 } else { 0.0 },
            if self.state.last_rewarded == Some(1) { 1.0 } else { 0.0 },
        ]
    }
}

impl Default for AllocatorEnv {
    fn default() -> Self {
        Self::new()
    }
}

impl Environment for AllocatorEnv {
    fn num_agents(&self) -> usize {
        2
    }

    fn num_actions(&self, agent: usize) -> usize {
        assert!(agent < 2, "agent index {agent} out of range");
        2
    }

    fn obs_width(&self) -> usize {
        4
    }

    fn state_width(&self) -> usize {
        4
    }

    fn horizon(&self) -> usize {
        2
    }

    fn reset(&mut self, _seed: u64) -> Vec<Vec<f64>> {
        self.state = ToyAllocatorState { time_step: 0, last_rewarded: None };
        vec![self.encode_state(), self.encode_state()]
    }

    fn step(&mut self, joint_action: &[usize]) -> StepResult {
        assert_eq!(joint_action.len(), 2, "allocator takes two actions (second ignored)");
        let recipient = joint_action[0];
        assert!(recipient < 2, "controller action {recipient} out of range");
        assert!(self.state.time_step < 2, "episode over; reset first");

        // Second reward to the same agent is doubled.
        let amount =
            if self.state.time_step == 1 && self.state.last_rewarded == Some(recipient) { 2.0 } else { 1.0 };
        let mut rewards = vec![0.0, 0.0];
        rewards[recipient] = amount;

        self.state.time_step += 1;
        self.state.last_rewarded = Some(recipient);
        let done = self.state.time_step == 2;
        StepResult {
            rewards,
            global_state: self.encode_state(),
            observations: vec![self.encode_state(), self.encode_state()],
            terminated: vec![done, done],
            done,
        }
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        assert!(agent < 2, "agent index {agent} out of range");
        self.encode_state()
    }

    fn global_state(&self) -> Vec<f64> {
        self.encode_state()
    }
}

/// Exact outcome of one allocation policy, computed by running the
/// simulator and discounting.
#[derive(Debug, Clone)]
pub struct AllocatorOutcome {
    /// Recipients of the first and second reward (agent indices).
    pub option: [usize; 2],
    /// Per-agent discounted returns V_i.
    pub v_selfish: [f64; 2],
    /// Short-term social value Σ_t γ^t SW(r_t), per welfare choice.
    pub v_short_sum: f64,
    pub v_short_min: f64,
    /// Long-term social value SW(V₁, V₂), per welfare choice.
    pub v_long_sum: f64,
    pub v_long_min: f64,
}

/// Evaluates all four deterministic allocation policies by simulation.
///
/// Option order: (0,0), (0,1), (1,0), (1,1) — "agent 1 twice", "agent 1 then
/// agent 2", "agent 2 then agent 1", "agent 2 twice".
pub fn enumerate_allocator_outcomes(gamma: f64) -> Vec<AllocatorOutcome> {
    assert!((0.0..1.0).contains(&gamma), "discount {gamma} outside [0, 1)");
    let mut out = Vec::new();
    for first in 0..2usize {
        for second in 0..2usize {
            let mut env = AllocatorEnv::new();
            env.reset(0);
            let mut v = [0.0, 0.0];
            let mut short = [0.0, 0.0]; // indexed by SWChoice order: [sum, min]
            let mut disc = 1.0;
            for &choice in &[first, second] {
                let r = env.step(&[choice, 0]);
                v[0] += disc * r.rewards[0];
                v[1] += disc * r.rewards[1];
                short[0] += disc * social_welfare(SWChoice::Sum, &r.rewards);
                short[1] += disc * social_welfare(SWChoice::Min, &r.rewards);
                disc *= gamma;
            }
            out.push(AllocatorOutcome {
                option: [first, second],
                v_selfish: v,
                v_short_sum: short[0],
                v_short_min: short[1],
                v_long_sum: social_welfare(SWChoice::Sum, &v),
                v_long_min: social_welfare(SWChoice::Min, &v),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doubling_applies_only_to_repeat_recipient() {
        let mut env = AllocatorEnv::new();
        env.reset(0);
        assert_eq!(env.step(&[0, 0]).rewards, vec![1.0, 0.0]);
        assert_eq!(env.step(&[0, 0]).rewards, vec![2.0, 0.0], "second same-agent reward doubles");

        env.reset(0);
        env.step(&[0, 0]);
        assert_eq!(env.step(&[1, 0]).rewards, vec![0.0, 1.0], "switching recipients does not double");
    }

    #[test]
    fn episode_lasts_exactly_two_decisions() {
        let mut env = AllocatorEnv::new();
        env.reset(0);
        assert!(!env.step(&[0, 0]).done);
        assert!(env.step(&[1, 0]).done);
    }

    #[test]
    fn outcomes_match_closed_forms_at_gamma_09() {
        // Closed forms: repeat options earn SW_sum = 1 + 2γ, alternating
        // options 1 + γ; the per-step minimum is always 0 because someone
        // earns nothing every step; the long-term minimum is γ for
        // alternating options (the later recipient's return) and 0 for
        // repeat options (the ignored agent's return).
        let g = 0.9;
        let table = enumerate_allocator_outcomes(g);
        assert_eq!(table.len(), 4);
        for o in &table {
            let repeat = o.option[0] == o.option[1];
            let expect_sum = if repeat { 1.0 + 2.0 * g } else { 1.0 + g };
            assert!((o.v_short_sum - expect_sum).abs() < 1e-12);
            assert!((o.v_long_sum - expect_sum).abs() < 1e-12, "sum commutes with discounting");
            assert!(o.v_short_min.abs() < 1e-12, "per-step min is always zero");
            let expect_min_long = if repeat { 0.0 } else { g };
            assert!((o.v_long_min - expect_min_long).abs() < 1e-12);
        }
    }

    #[test]
    fn gamma_zero_reduces_to_first_reward() {
        for o in enumerate_allocator_outcomes(0.0) {
            assert!((o.v_short_sum - 1.0).abs() < 1e-15, "no discounted second step");
            assert!((o.v_long_sum - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn long_term_min_prefers_alternation_short_term_sees_nothing() {
        // The defining property: under SW = min the two definitions rank
        // the options differently.
        let table = enumerate_allocator_outcomes(0.9);
        let alternating: Vec<_> = table.iter().filter(|o| o.option[0] != o.option[1]).collect();
        let repeating: Vec<_> = table.iter().filter(|o| o.option[0] == o.option[1]).collect();
        for a in &alternating {
            for r in &repeating {
                assert!(a.v_long_min > r.v_long_min, "long-term min must favor alternation");
                assert_eq!(a.v_short_min, r.v_short_min, "short-term min cannot distinguish");
            }
        }
    }
}
