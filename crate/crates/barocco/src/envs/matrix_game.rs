//! Two-player matrix games, in particular the Modified Prisoner's Dilemma.
//!
//! The Modified Prisoner's Dilemma extends the classic 2×2 dilemma with a
//! third column action, Sacrifice: the column player hands the row player
//! the largest payoff in the game (21) and keeps nothing. Sacrifice is
//! strictly dominated selfishly, yet maximizes the group sum — which makes
//! the game a sharp probe for prosociality: as λ grows, learned play should
//! move from mutual defection through mutual cooperation to
//! (Defect or Cooperate, Sacrifice).

use super::{Environment, StepResult};

/// Payoff bimatrix for a two-player game; entry `[row][col]` holds the pair
/// `(row player's payoff, column player's payoff)`.
#[derive(Debug, Clone)]
pub struct MatrixGameSpec {
    /// `payoffs[a1][a2] = [r1, r2]`.
    pub payoffs: Vec<Vec<[f64; 2]>>,
    /// Single-letter action labels per player, for sweep tables.
    pub action_names: [Vec<&'static str>; 2],
    played: bool,
}

impl MatrixGameSpec {
    /// General bimatrix game from a payoff table.
    pub fn new(payoffs: Vec<Vec<[f64; 2]>>, action_names: [Vec<&'static str>; 2]) -> Self {
        assert!(!payoffs.is_empty(), "row player needs at least one action");
        let cols = payoffs[0].len();
        assert!(cols > 0, "column player needs at least one action");
        assert!(payoffs.iter().all(|r| r.len() == cols), "ragged payoff table");
        assert_eq!(action_names[0].len(), payoffs.len(), "row action names mismatch");
        assert_eq!(action_names[1].len(), cols, "column action names mismatch");
        MatrixGameSpec { payoffs, action_names, played: false }
    }

    /// The Modified Prisoner's Dilemma.
    ///
    /// Rows (player 1): Defect, Cooperate. Columns (player 2): Defect,
    /// Cooperate, Sacrifice. Payoffs:
    ///
    /// |       | D       | C       | S       |
    /// |-------|---------|---------|---------|
    /// | **D** | (5, 5)  | (15, 0) | (21, 0) |
    /// | **C** | (0, 15) | (10,10) | (21, 0) |
    pub fn modified_pd() -> Self {
        Self::new(
            vec![
                vec![[5.0, 5.0], [15.0, 0.0], [21.0, 0.0]],
                vec![[0.0, 15.0], [10.0, 10.0], [21.0, 0.0]],
            ],
            [vec!["D", "C"], vec!["D", "C", "S"]],
        )
    }

    /// Payoff pair for a joint action.
    pub fn payoff(&self, a1: usize, a2: usize) -> [f64; 2] {
        assert!(a1 < self.payoffs.len(), "row action {a1} out of range");
        assert!(a2 < self.payoffs[0].len(), "column action {a2} out of range");
        self.payoffs[a1][a2]
    }

    /// Label of `action` for `agent` (0 = row, 1 = column).
    pub fn action_name(&self, agent: usize, action: usize) -> &'static str {
        self.action_names[agent][action]
    }
}

impl Environment for MatrixGameSpec {
    fn num_agents(&self) -> usize {
        2
    }

    fn num_actions(&self, agent: usize) -> usize {
        assert!(agent < 2, "agent index {agent} out of range");
        if agent == 0 {
            self.payoffs.len()
        } else {
            self.payoffs[0].len()
        }
    }

    fn obs_width(&self) -> usize {
        1
    }

    fn state_width(&self) -> usize {
        1
    }

    fn horizon(&self) -> usize {
        1
    }

    fn reset(&mut self, _seed: u64) -> Vec<Vec<f64>> {
        self.played = false;
        vec![vec![1.0], vec![1.0]]
    }

    fn step(&mut self, joint_action: &[usize]) -> StepResult {
        assert_eq!(joint_action.len(), 2, "matrix game takes two actions");
        assert!(!self.played, "single-shot game already played; reset first");
        self.played = true;
        let r = self.payoff(joint_action[0], joint_action[1]);
        StepResult {
            rewards: r.to_vec(),
            global_state: vec![1.0],
            observations: vec![vec![1.0], vec![1.0]],
            terminated: vec![true, true],
            done: true,
        }
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        assert!(agent < 2, "agent index {agent} out of range");
        vec![1.0]
    }

    fn global_state(&self) -> Vec<f64> {
        vec![1.0]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modified_pd_payoff_table() {
        let g = MatrixGameSpec::modified_pd();
        assert_eq!(g.payoff(0, 0), [5.0, 5.0]);
        assert_eq!(g.payoff(0, 1), [15.0, 0.0]);
        assert_eq!(g.payoff(0, 2), [21.0, 0.0]);
        assert_eq!(g.payoff(1, 0), [0.0, 15.0]);
        assert_eq!(g.payoff(1, 1), [10.0, 10.0]);
        assert_eq!(g.payoff(1, 2), [21.0, 0.0]);
    }

    #[test]
    fn defect_dominates_selfishly() {
        // Against every column action, the row player's Defect payoff is at
        // least its Cooperate payoff (strictly better against D and C).
        let g = MatrixGameSpec::modified_pd();
        for a2 in 0..3 {
            assert!(g.payoff(0, a2)[0] >= g.payoff(1, a2)[0]);
        }
        assert!(g.payoff(0, 0)[0] > g.payoff(1, 0)[0]);
        assert!(g.payoff(0, 1)[0] > g.payoff(1, 1)[0]);
    }

    #[test]
    fn sacrifice_maximizes_group_sum() {
        let g = MatrixGameSpec::modified_pd();
        let sum = |a1: usize, a2: usize| g.payoff(a1, a2).iter().sum::<f64>();
        for a1 in 0..2 {
            for a2 in 0..3 {
                assert!(sum(a1, 2) >= sum(a1, a2), "S must top the sum in row {a1}");
            }
        }
        assert_eq!(sum(0, 2), 21.0);
    }

    #[test]
    fn step_emits_table_payoffs_and_ends_episode() {
        let mut g = MatrixGameSpec::modified_pd();
        g.reset(0);
        let r = g.step(&[0, 2]);
        assert_eq!(r.rewards, vec![21.0, 0.0]);
        assert!(r.done);

        g.reset(0);
        let r = g.step(&[1, 1]);
        assert_eq!(r.rewards, vec![10.0, 10.0]);
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn step_rejects_out_of_range_action() {
        let mut g = MatrixGameSpec::modified_pd();
        g.reset(0);
        let _ = g.step(&[0, 3]);
    }

    #[test]
    fn action_names_match_indices() {
        let g = MatrixGameSpec::modified_pd();
        assert_eq!(g.action_name(0, 0), "D");
        assert_eq!(g.action_name(0, 1), "C");
        assert_eq!(g.action_name(1, 2), "S");
    }
}
