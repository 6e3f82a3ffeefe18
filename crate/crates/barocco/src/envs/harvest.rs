//! Harvest: a sequential social dilemma. Agents collect apples (+1) that
//! regrow faster the more apples remain nearby, so over-harvesting destroys
//! the commons. Agents carry a beam weapon: being hit costs −50 and
//! respawns the victim; the beam leaves fire on the ground for one step and
//! entering fire costs −1.
//!
//! Mechanics per step, in fixed order: movement/rotation → fire damage from
//! last step's beams → apple collection → new beams (hits, respawns, fresh
//! fire) → apple regrowth → clock.

use super::{Environment, StepResult};
use crate::rng::{stream_rng, Stream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Actions: four absolute moves, two rotations, fire, pass.
pub const HARVEST_ACTIONS: usize = 8;
const ACT_UP: usize = 0;
const ACT_FIRE: usize = 6;

/// Orientation encoding: 0 up, 1 right, 2 down, 3 left.
const ORIENT_DELTAS: [(i32, i32); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];
const MOVE_DELTAS: [(i32, i32); 4] = [(0, -1), (0, 1), (-1, 0), (1, 0)];

/// Reward constants.
const APPLE_REWARD: f64 = 1.0;
const HIT_PENALTY: f64 = -50.0;
const FIRE_PENALTY: f64 = -1.0;

/// Static layout and episode parameters.
#[derive(Debug, Clone)]
pub struct HarvestConfig {
    pub width: usize,
    pub height: usize,
    pub horizon: usize,
    /// Odd side length of the egocentric observation window.
    pub window: usize,
    /// Beam reach in cells (excluding the firing agent's own cell).
    pub beam_length: usize,
    /// Regrowth probability ladder for 0 / 1–2 / 3–4 / ≥5 apples within
    /// Chebyshev radius 2. Must be nondecreasing with the first entry 0.
    pub regrowth: [f64; 4],
    /// Designated apple cells.
    pub apple_cells: Vec<(usize, usize)>,
    /// One spawn cell per agent, with initial orientations.
    pub spawns: Vec<(usize, usize)>,
    pub spawn_orientations: Vec<usize>,
}

/// Diamond patch of apple cells (Manhattan radius `r`) clipped to the grid.
fn diamond(cx: i32, cy: i32, r: i32, width: usize, height: usize) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    for y in (cy - r).max(0)..=(cy + r).min(height as i32 - 1) {
        for x in (cx - r).max(0)..=(cx + r).min(width as i32 - 1) {
            if (x - cx).abs() + (y - cy).abs() <= r {
                cells.push((x as usize, y as usize));
            }
        }
    }
    cells
}

impl HarvestConfig {
    /// Desk-scale default: two agents on a 9×9 map sharing one small
    /// central diamond apple patch. A single scarce commons makes the
    /// dilemma real: two agents stripping it faster than it regrows turn
    /// it into a permanent desert, while paced harvesting sustains it for
    /// the whole episode. Spawns face the patch from opposite sides so
    /// both agents are in contact with apples immediately, and the short
    /// beam means exiling the rival requires point-blank chasing instead
    /// of sniping across the patch.
    pub fn desk() -> Self {
        let (width, height) = (9, 9);
        let apple_cells = diamond(4, 4, 2, width, height);
        HarvestConfig {
            width,
            height,
            horizon: 250,
            window: 5,
            beam_length: 2,
            regrowth: [0.0, 0.01, 0.05, 0.1],
            apple_cells,
            spawns: vec![(1, 4), (7, 4)],
            spawn_orientations: vec![1, 3],
        }
    }

    /// Full-scale sizing: the original environment's dimensions and agent
    /// count, with generated apple patches at a comparable density.
    pub fn full() -> Self {
        let (width, height) = (38, 16);
        let mut apple_cells = Vec::new();
        for (cx, cy) in [(6, 4), (13, 10), (19, 5), (25, 11), (31, 4), (33, 12)] {
            apple_cells.extend(diamond(cx, cy, 3, width, height));
        }
        apple_cells.sort();
        apple_cells.dedup();
        HarvestConfig {
            width,
            height,
            horizon: 1000,
            window: 15,
            beam_length: 10,
            regrowth: [0.0, 0.01, 0.05, 0.1],
            apple_cells,
            spawns: vec![(0, 2), (0, 5), (0, 8), (0, 11), (0, 14)],
            spawn_orientations: vec![1; 5],
        }
    }

    fn validate(&self) {
        assert!(self.window % 2 == 1, "observation window must be odd");
        assert!(!self.spawns.is_empty(), "need at least one agent");
        assert_eq!(self.spawns.len(), self.spawn_orientations.len(), "one orientation per spawn");
        let inside = |&(x, y): &(usize, usize)| x < self.width && y < self.height;
        assert!(self.apple_cells.iter().all(inside), "apple cell off grid");
        assert!(self.spawns.iter().all(inside), "spawn off grid");
        assert!(self.spawn_orientations.iter().all(|&o| o < 4), "orientation out of range");
        for w in self.regrowth.windows(2) {
            assert!(w[0] <= w[1], "regrowth ladder must be nondecreasing");
        }
        assert_eq!(self.regrowth[0], 0.0, "zero nearby apples must never regrow");
        let mut sorted = self.spawns.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), self.spawns.len(), "spawns must be distinct");
    }
}

/// Dynamic state: apples, agents, fire.
#[derive(Debug, Clone)]
pub struct HarvestState {
    /// Apple present per cell (row-major width×height).
    pub apples: Vec<bool>,
    /// Burning cells (placed by last step's beams), row-major.
    pub fire: Vec<bool>,
    pub positions: Vec<(usize, usize)>,
    pub orientations: Vec<usize>,
    pub step: usize,
}

/// The environment proper.
#[derive(Debug, Clone)]
pub struct HarvestEnv {
    config: HarvestConfig,
    state: HarvestState,
    /// Designated apple cells as a row-major mask.
    apple_mask: Vec<bool>,
    rng: ChaCha8Rng,
    last_apples: Vec<f64>,
}

impl HarvestEnv {
    pub fn new(config: HarvestConfig) -> Self {
        config.validate();
        let mut apple_mask = vec![false; config.width * config.height];
        for &(x, y) in &config.apple_cells {
            apple_mask[y * config.width + x] = true;
        }
        let n = config.spawns.len();
        let state = HarvestState {
            apples: apple_mask.clone(),
            fire: vec![false; config.width * config.height],
            positions: config.spawns.clone(),
            orientations: config.spawn_orientations.clone(),
            step: 0,
        };
        HarvestEnv {
            config,
            state,
            apple_mask,
            rng: stream_rng(0, Stream::Env),
            last_apples: vec![0.0; n],
        }
    }

    pub fn state(&self) -> &HarvestState {
        &self.state
    }

    pub fn config(&self) -> &HarvestConfig {
        &self.config
    }

    /// Total apples currently on the map.
    pub fn apples_on_map(&self) -> usize {
        self.state.apples.iter().filter(|&&a| a).count()
    }

    fn idx(&self, x: usize, y: usize) -> usize {
        y * self.config.width + x
    }

    /// Cells covered by a beam fired from `pos` toward `orientation`.
    fn beam_cells(&self, pos: (usize, usize), orientation: usize) -> Vec<(usize, usize)> {
        let (dx, dy) = ORIENT_DELTAS[orientation];
        let mut cells = Vec::new();
        let (mut x, mut y) = (pos.0 as i32, pos.1 as i32);
        for _ in 0..self.config.beam_length {
            x += dx;
            y += dy;
            if x < 0 || y < 0 || x as usize >= self.config.width || y as usize >= self.config.height {
                break;
            }
            cells.push((x as usize, y as usize));
        }
        cells
    }

    /// Apples within Chebyshev radius 2 of a cell, from a snapshot.
    fn nearby_apples(&self, snapshot: &[bool], x: usize, y: usize) -> usize {
        let mut count = 0;
        for ny in y.saturating_sub(2)..=(y + 2).min(self.config.height - 1) {
            for nx in x.saturating_sub(2)..=(x + 2).min(self.config.width - 1) {
                if snapshot[self.idx(nx, ny)] {
                    count += 1;
                }
            }
        }
        count
    }

    fn regrowth_prob(&self, nearby: usize) -> f64 {
        match nearby {
            0 => self.config.regrowth[0],
            1 | 2 => self.config.regrowth[1],
            3 | 4 => self.config.regrowth[2],
            _ => self.config.regrowth[3],
        }
    }

    /// First free cell for a respawn: the agent's own spawn if no *other*
    /// agent sits there, otherwise the first free cell in row-major order.
    fn respawn_cell(&self, agent: usize, positions: &[(usize, usize)]) -> (usize, usize) {
        let taken = |cell: (usize, usize)| {
            positions.iter().enumerate().any(|(k, &p)| k != agent && p == cell)
        };
        let spawn = self.config.spawns[agent];
        if !taken(spawn) {
            return spawn;
        }
        for y in 0..self.config.height {
            for x in 0..self.config.width {
                if !taken((x, y)) {
                    return (x, y);
                }
            }
        }
        unreachable!("grid larger than the agent count");
    }

    fn window_plane<F: Fn(usize, usize) -> f64>(&self, center: (usize, usize), f: F) -> Vec<f64> {
        let half = (self.config.window / 2) as i32;
        let mut plane = Vec::with_capacity(self.config.window * self.config.window);
        for dy in -half..=half {
            for dx in -half..=half {
                let x = center.0 as i32 + dx;
                let y = center.1 as i32 + dy;
                if x < 0 || y < 0 || x as usize >= self.config.width || y as usize >= self.config.height {
                    plane.push(0.0);
                } else {
                    plane.push(f(x as usize, y as usize));
                }
            }
        }
        plane
    }
}

impl Environment for HarvestEnv {
    fn num_agents(&self) -> usize {
        self.config.spawns.len()
    }

    fn num_actions(&self, agent: usize) -> usize {
        assert!(agent < self.num_agents(), "agent index {agent} out of range");
        HARVEST_ACTIONS
    }

    fn obs_width(&self) -> usize {
        // Three windowed feature planes (apples, agents, fire), own
        // orientation one-hot, own normalized position.
        3 * self.config.window * self.config.window + 4 + 2
    }

    fn state_width(&self) -> usize {
        // Full apple and fire planes, per-agent pose, episode clock.
        2 * self.config.width * self.config.height + 3 * self.num_agents() + 1
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        self.state = HarvestState {
            apples: self.apple_mask.clone(),
            fire: vec![false; self.config.width * self.config.height],
            positions: self.config.spawns.clone(),
            orientations: self.config.spawn_orientations.clone(),
            step: 0,
        };
        self.rng = stream_rng(seed, Stream::Env);
        self.last_apples = vec![0.0; self.num_agents()];
        (0..self.num_agents()).map(|i| self.observe(i)).collect()
    }

    fn step(&mut self, joint_action: &[usize]) -> StepResult {
        let n = self.num_agents();
        assert_eq!(joint_action.len(), n, "one action per agent");
        assert!(
            joint_action.iter().all(|&a| a < HARVEST_ACTIONS),
            "action out of range: {joint_action:?}"
        );
        assert!(self.state.step < self.config.horizon, "episode over; reset first");
        let mut rewards = vec![0.0; n];
        let mut terminated = vec![false; n];
        self.last_apples = vec![0.0; n];

        // 1. Movement and rotation, resolved in index order; a move into a
        // cell currently occupied by any other agent is blocked.
        for i in 0..n {
            match joint_action[i] {
                a if (ACT_UP..4).contains(&a) => {
                    let (dx, dy) = MOVE_DELTAS[a];
                    let (x, y) = self.state.positions[i];
                    let nx = x as i32 + dx;
                    let ny = y as i32 + dy;
                    if nx >= 0
                        && ny >= 0
                        && (nx as usize) < self.config.width
                        && (ny as usize) < self.config.height
                    {
                        let target = (nx as usize, ny as usize);
                        let blocked = (0..n).any(|j| j != i && self.state.positions[j] == target);
                        if !blocked {
                            self.state.positions[i] = target;
                        }
                    }
                }
                4 => self.state.orientations[i] = (self.state.orientations[i] + 3) % 4,
                5 => self.state.orientations[i] = (self.state.orientations[i] + 1) % 4,
                _ => {} // fire handled below; pass does nothing
            }
        }

        // 2. Fire left by last step's beams burns whoever stands in it now.
        for i in 0..n {
            let (x, y) = self.state.positions[i];
            if self.state.fire[self.idx(x, y)] {
                rewards[i] += FIRE_PENALTY;
            }
        }

        // 3. Apple collection.
        for i in 0..n {
            let (x, y) = self.state.positions[i];
            let idx = self.idx(x, y);
            if self.state.apples[idx] {
                self.state.apples[idx] = false;
                rewards[i] += APPLE_REWARD;
                self.last_apples[i] += 1.0;
            }
        }

        // 4. New beams: all hits are computed simultaneously, then victims
        // respawn; traversed cells burn for the next step.
        let mut new_fire = vec![false; self.config.width * self.config.height];
        let mut hit = vec![false; n];
        for i in 0..n {
            if joint_action[i] != ACT_FIRE {
                continue;
            }
            for cell in self.beam_cells(self.state.positions[i], self.state.orientations[i]) {
                new_fire[self.idx(cell.0, cell.1)] = true;
                for j in 0..n {
                    if j != i && self.state.positions[j] == cell {
                        hit[j] = true;
                    }
                }
            }
        }
        for j in 0..n {
            if hit[j] {
                rewards[j] += HIT_PENALTY;
                terminated[j] = true;
                let cell = self.respawn_cell(j, &self.state.positions);
                self.state.positions[j] = cell;
                self.state.orientations[j] = self.config.spawn_orientations[j];
            }
        }
        self.state.fire = new_fire;

        // 5. Regrowth: simultaneous draws against a post-collection
        // snapshot, scanned in row-major order.
        let snapshot = self.state.apples.clone();
        for y in 0..self.config.height {
            for x in 0..self.config.width {
                let idx = self.idx(x, y);
                if !self.apple_mask[idx] || snapshot[idx] {
                    continue;
                }
                let p = self.regrowth_prob(self.nearby_apples(&snapshot, x, y));
                if self.rng.gen::<f64>() < p {
                    self.state.apples[idx] = true;
                }
            }
        }

        // 6. Clock.
        self.state.step += 1;
        let done = self.state.step == self.config.horizon;
        if done {
            for t in terminated.iter_mut() {
                *t = true;
            }
        }

        StepResult {
            rewards,
            global_state: self.global_state(),
            observations: (0..n).map(|i| self.observe(i)).collect(),
            terminated,
            done,
        }
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        assert!(agent < self.num_agents(), "agent index {agent} out of range");
        let center = self.state.positions[agent];
        let mut v = Vec::with_capacity(self.obs_width());
        v.extend(self.window_plane(center, |x, y| {
            if self.state.apples[y * self.config.width + x] {
                1.0
            } else {
                0.0
            }
        }));
        v.extend(self.window_plane(center, |x, y| {
            if self.state.positions.contains(&(x, y)) {
                1.0
            } else {
                0.0
            }
        }));
        v.extend(self.window_plane(center, |x, y| {
            if self.state.fire[y * self.config.width + x] {
                1.0
            } else {
                0.0
            }
        }));
        let mut orient = vec![0.0; 4];
        orient[self.state.orientations[agent]] = 1.0;
        v.extend(orient);
        v.push(center.0 as f64 / (self.config.width - 1) as f64);
        v.push(center.1 as f64 / (self.config.height - 1) as f64);
        v
    }

    fn global_state(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.state_width());
        v.extend(self.state.apples.iter().map(|&a| if a { 1.0 } else { 0.0 }));
        v.extend(self.state.fire.iter().map(|&f| if f { 1.0 } else { 0.0 }));
        for i in 0..self.num_agents() {
            v.push(self.state.positions[i].0 as f64 / (self.config.width - 1) as f64);
            v.push(self.state.positions[i].1 as f64 / (self.config.height - 1) as f64);
            v.push(self.state.orientations[i] as f64 / 3.0);
        }
        v.push(self.state.step as f64 / self.config.horizon as f64);
        v
    }

    /// Apples collected per agent on the last step (the figure metric).
    fn metric_delta(&self) -> Vec<f64> {
        self.last_apples.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> HarvestEnv {
        let mut e = HarvestEnv::new(HarvestConfig::desk());
        e.reset(42);
        e
    }

    #[test]
    fn reset_fills_every_apple_cell() {
        let e = env();
        assert_eq!(e.apples_on_map(), e.config().apple_cells.len());
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = HarvestEnv::new(HarvestConfig::desk());
        let mut b = HarvestEnv::new(HarvestConfig::desk());
        assert_eq!(a.reset(9), b.reset(9));
        for step in 0..60 {
            let act = vec![(step * 5) % 8, (step * 3 + 1) % 8];
            let ra = a.step(&act);
            let rb = b.step(&act);
            assert_eq!(ra.rewards, rb.rewards);
            assert_eq!(ra.observations, rb.observations);
        }
    }

    #[test]
    fn collecting_an_apple_pays_one_and_empties_the_cell() {
        let mut config = HarvestConfig::desk();
        config.spawns = vec![(4, 1), (8, 8)]; // one step above an apple at (4, 2)
        let mut e = HarvestEnv::new(config);
        e.reset(0);
        let before = e.apples_on_map();
        let r = e.step(&[1, 7]); // move down onto the apple; other passes
        assert_eq!(r.rewards[0], 1.0);
        assert_eq!(e.apples_on_map(), before - 1);
        assert_eq!(e.metric_delta(), &[1.0, 0.0]);
    }

    #[test]
    fn beam_hit_costs_fifty_and_respawns_victim() {
        let mut config = HarvestConfig::desk();
        config.spawns = vec![(4, 0), (6, 0)]; // victim two cells to the right, no apples on row 0
        config.spawn_orientations = vec![1, 3];
        let mut e = HarvestEnv::new(config);
        e.reset(0);
        let r = e.step(&[ACT_FIRE, 7]);
        assert_eq!(r.rewards[1], HIT_PENALTY);
        assert!(r.terminated[1]);
        assert_eq!(e.state().positions[1], e.config().spawns[1], "victim respawned");
        // The traversed cells burn next step.
        assert!(e.state().fire[5], "beam path on fire");
    }

    #[test]
    fn entering_fire_costs_one() {
        let mut config = HarvestConfig::desk();
        config.spawns = vec![(0, 3), (0, 6)]; // apple-free column
        config.spawn_orientations = vec![2, 0]; // agent 0 faces down
        let mut e = HarvestEnv::new(config);
        e.reset(0);
        e.step(&[ACT_FIRE, 7]); // beam covers (0,4) and (0,5)
        // Agent 0 steps into the burning cell below.
        let r = e.step(&[1, 7]);
        assert_eq!(r.rewards[0], FIRE_PENALTY);
        // Fire expires afterwards.
        let r = e.step(&[7, 7]);
        assert_eq!(r.rewards[0], 0.0, "fire lasts exactly one step");
    }

    #[test]
    fn movement_is_blocked_by_other_agents_and_walls() {
        let mut config = HarvestConfig::desk();
        config.spawns = vec![(0, 0), (1, 0)];
        let mut e = HarvestEnv::new(config);
        e.reset(0);
        e.step(&[3, 7]); // agent 0 tries to move right into agent 1
        assert_eq!(e.state().positions[0], (0, 0), "blocked by the other agent");
        e.step(&[2, 7]); // agent 0 tries to move left off the grid
        assert_eq!(e.state().positions[0], (0, 0), "blocked by the wall");
    }

    #[test]
    fn rotation_cycles_through_orientations() {
        let mut e = env();
        let o = e.state().orientations[0];
        e.step(&[5, 7]);
        assert_eq!(e.state().orientations[0], (o + 1) % 4);
        e.step(&[4, 7]);
        e.step(&[4, 7]);
        assert_eq!(e.state().orientations[0], (o + 3) % 4);
    }

    #[test]
    fn no_regrowth_without_nearby_apples() {
        let mut config = HarvestConfig::desk();
        config.horizon = 400;
        let mut e = HarvestEnv::new(config);
        e.reset(0);
        // Empty the entire map by hand, then verify nothing ever regrows.
        for idx in 0..e.state.apples.len() {
            e.state.apples[idx] = false;
        }
        for _ in 0..300 {
            e.step(&[7, 7]);
            assert_eq!(e.apples_on_map(), 0, "a dead commons must stay dead");
        }
    }

    #[test]
    fn regrowth_is_bounded_by_empty_designated_cells() {
        let mut e = env();
        let designated = e.config().apple_cells.len();
        for step in 0..50 {
            let act = vec![step % 4, (step + 2) % 4];
            let before = e.apples_on_map();
            e.step(&act);
            let grown = e.apples_on_map() as i64 - before as i64;
            assert!(grown <= (designated - before) as i64, "regrowth beyond empty cells");
            assert!(e.state().apples.iter().zip(&e.apple_mask).all(|(&a, &m)| m || !a));
        }
    }

    #[test]
    fn observation_and_state_widths() {
        let e = env();
        assert_eq!(e.obs_width(), 81);
        assert_eq!(e.observe(0).len(), 81);
        assert_eq!(e.state_width(), 169);
        assert_eq!(e.global_state().len(), 169);
    }

    #[test]
    fn full_scale_window_and_agent_count() {
        let e = HarvestEnv::new(HarvestConfig::full());
        assert_eq!(e.config().window, 15);
        assert_eq!(e.num_agents(), 5);
        assert_eq!(e.obs_width(), 3 * 15 * 15 + 6);
    }

    #[test]
    fn episode_ends_at_horizon() {
        let mut config = HarvestConfig::desk();
        config.horizon = 5;
        let mut e = HarvestEnv::new(config);
        e.reset(0);
        for _ in 0..4 {
            assert!(!e.step(&[7, 7]).done);
        }
        assert!(e.step(&[7, 7]).done);
    }
}
