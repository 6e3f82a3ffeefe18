//! Eldorado: a two-agent survival gridworld. Agents manage food and water
//! supplies, a shared map with rechargeable food tiles and an infinite water
//! tile, and may attack one another to steal resources.
//!
//! Mechanics per step, in fixed order: movement → resource collection →
//! attacks → supply decay → health update → termination/respawn → food-tile
//! recharge countdown. Dying costs −1 and respawns the agent immediately;
//! surviving to the horizon earns +1.

use super::{Environment, StepResult};
use crate::rng::{stream_rng, Stream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Health pool cap.
const MAX_HEALTH: i32 = 10;
/// Resource carrying capacity per supply.
const CAPACITY: i32 = 32;
/// Supplies above this threshold regenerate health.
const REGEN_THRESHOLD: i32 = 16;
/// Units gained per collection.
const YIELD: i32 = 6;
/// Turns a food tile stays unavailable after harvest.
const RECHARGE_TURNS: u32 = 6;
/// Probability that attack damage doubles.
const CRIT_PROB: f64 = 1.0 / 50.0;
/// Moves: stay, up, down, left, right; with and without attack.
pub const ELDORADO_ACTIONS: usize = 10;

const MOVE_DELTAS: [(i32, i32); 5] = [(0, 0), (0, -1), (0, 1), (-1, 0), (1, 0)];

/// Static layout and episode parameters.
#[derive(Debug, Clone)]
pub struct EldoradoConfig {
    pub width: usize,
    pub height: usize,
    pub horizon: usize,
    /// Rechargeable food tiles.
    pub food_tiles: Vec<(usize, usize)>,
    /// The infinite water tile.
    pub water_tile: (usize, usize),
    /// One spawn cell per agent.
    pub spawns: [(usize, usize); 2],
    /// When true, stolen resources are destroyed instead of transferred.
    pub steal_destroys: bool,
}

impl EldoradoConfig {
    /// Desk-scale default: a 5×5 grid with the infinite water tile in the
    /// center, one rechargeable food tile at the middle of each edge, and
    /// spawns flanking the water. Looping between two food tiles through
    /// the center sustains an agent with a comfortable margin (two tiles
    /// yield 12/7 food per turn against a decay of 1, water collected in
    /// passing), so both agents can survive the whole episode — but every
    /// loop crosses the central bottleneck, where the combined
    /// move-and-attack actions make robbing the neighbour a free ride.
    /// Stolen supplies and chip damage wreck a forager's margin, so
    /// raiding pays individually while peace pays collectively.
    pub fn desk() -> Self {
        EldoradoConfig {
            width: 5,
            height: 5,
            horizon: 150,
            food_tiles: vec![(0, 2), (4, 2), (2, 0), (2, 4)],
            water_tile: (2, 2),
            spawns: [(1, 2), (3, 2)],
            steal_destroys: false,
        }
    }

    /// Full-scale episode length, on the original two-food-tile layout
    /// whose observation vector is 28 elements wide.
    pub fn full() -> Self {
        EldoradoConfig {
            horizon: 1000,
            food_tiles: vec![(0, 2), (4, 2)],
            ..Self::desk()
        }
    }

    fn validate(&self) {
        let inside = |&(x, y): &(usize, usize)| x < self.width && y < self.height;
        assert!(self.width >= 3 && self.height >= 3, "grid too small");
        assert!(self.horizon > 0, "horizon must be positive");
        assert!(self.food_tiles.iter().all(inside), "food tile off grid");
        assert!(inside(&self.water_tile), "water tile off grid");
        assert!(self.spawns.iter().all(inside), "spawn off grid");
        assert_ne!(self.spawns[0], self.spawns[1], "spawns must differ");
    }
}

/// Dynamic per-agent state.
#[derive(Debug, Clone)]
struct AgentState {
    pos: (usize, usize),
    health: i32,
    food: i32,
    water: i32,
    steps_alive: u32,
    last_move: usize,
    last_attack: bool,
    /// False until the agent's first death this episode (drives the
    /// lifetime metric).
    died_once: bool,
}

/// Full environment state: agents, food-tile recharge countdowns, clock.
#[derive(Debug, Clone)]
pub struct EldoradoState {
    agents: Vec<AgentState>,
    /// Remaining unavailable turns per food tile; 0 means harvestable.
    pub food_countdowns: Vec<u32>,
    pub step: usize,
}

/// The environment proper.
#[derive(Debug, Clone)]
pub struct EldoradoEnv {
    config: EldoradoConfig,
    state: EldoradoState,
    rng: ChaCha8Rng,
    last_metric: Vec<f64>,
}

impl EldoradoEnv {
    pub fn new(config: EldoradoConfig) -> Self {
        config.validate();
        let state = EldoradoState {
            agents: (0..2).map(|i| Self::fresh_agent(&config, i)).collect(),
            food_countdowns: vec![0; config.food_tiles.len()],
            step: 0,
        };
        EldoradoEnv {
            config,
            state,
            rng: stream_rng(0, Stream::Env),
            last_metric: vec![0.0, 0.0],
        }
    }

    fn fresh_agent(config: &EldoradoConfig, idx: usize) -> AgentState {
        AgentState {
            pos: config.spawns[idx],
            health: MAX_HEALTH,
            food: REGEN_THRESHOLD,
            water: REGEN_THRESHOLD,
            steps_alive: 0,
            last_move: 0,
            last_attack: false,
            died_once: false,
        }
    }

    /// Read-only view of the state (tests and debugging).
    pub fn state(&self) -> &EldoradoState {
        &self.state
    }

    #[cfg(test)]
    fn agent_mut(&mut self, idx: usize) -> &mut AgentState {
        &mut self.state.agents[idx]
    }

    pub fn config(&self) -> &EldoradoConfig {
        &self.config
    }

    fn agent_features(&self, idx: usize) -> Vec<f64> {
        let a = &self.state.agents[idx];
        vec![
            a.pos.0 as f64 / (self.config.width - 1) as f64,
            a.pos.1 as f64 / (self.config.height - 1) as f64,
            a.health as f64 / MAX_HEALTH as f64,
            a.food as f64 / CAPACITY as f64,
            a.water as f64 / CAPACITY as f64,
            a.steps_alive as f64 / self.config.horizon as f64,
        ]
    }

    fn action_features(&self, idx: usize) -> Vec<f64> {
        let a = &self.state.agents[idx];
        let mut f = vec![0.0; 6];
        f[a.last_move] = 1.0;
        f[5] = if a.last_attack { 1.0 } else { 0.0 };
        f
    }

    fn tile_features(&self) -> Vec<f64> {
        let mut f = Vec::with_capacity(2 * self.state.food_countdowns.len());
        for &cd in &self.state.food_countdowns {
            f.push(if cd == 0 { 1.0 } else { 0.0 });
            f.push(cd as f64 / (RECHARGE_TURNS + 1) as f64);
        }
        f
    }

    /// Feature vector in a given agent order (observations are egocentric:
    /// self first; the global state uses canonical order).
    fn features_in_order(&self, order: [usize; 2]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.obs_width());
        for &i in &order {
            v.extend(self.agent_features(i));
        }
        for &i in &order {
            v.extend(self.action_features(i));
        }
        v.extend(self.tile_features());
        v
    }
}

impl Environment for EldoradoEnv {
    fn num_agents(&self) -> usize {
        2
    }

    fn num_actions(&self, agent: usize) -> usize {
        assert!(agent < 2, "agent index {agent} out of range");
        ELDORADO_ACTIONS
    }

    fn obs_width(&self) -> usize {
        // Two agent blocks (6 each), two last-action blocks (6 each), plus
        // two features per food tile; 28 wide for the default two tiles.
        24 + 2 * self.config.food_tiles.len()
    }

    fn state_width(&self) -> usize {
        self.obs_width() + 1 // plus episode clock
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn reset(&mut self, seed: u64) -> Vec<Vec<f64>> {
        self.state = EldoradoState {
            agents: (0..2).map(|i| Self::fresh_agent(&self.config, i)).collect(),
            food_countdowns: vec![0; self.config.food_tiles.len()],
            step: 0,
        };
        self.rng = stream_rng(seed, Stream::Env);
        self.last_metric = vec![0.0, 0.0];
        (0..2).map(|i| self.observe(i)).collect()
    }

    fn step(&mut self, joint_action: &[usize]) -> StepResult {
        assert_eq!(joint_action.len(), 2, "two actions per step");
        assert!(
            joint_action.iter().all(|&a| a < ELDORADO_ACTIONS),
            "action out of range: {joint_action:?}"
        );
        assert!(self.state.step < self.config.horizon, "episode over; reset first");
        let mut rewards = vec![0.0; 2];
        let mut terminated = vec![false; 2];

        // 1. Movement (agents may overlap; off-grid moves become stays).
        for i in 0..2 {
            let mv = joint_action[i] % 5;
            let (dx, dy) = MOVE_DELTAS[mv];
            let a = &mut self.state.agents[i];
            let nx = a.pos.0 as i32 + dx;
            let ny = a.pos.1 as i32 + dy;
            if nx >= 0 && ny >= 0 && (nx as usize) < self.config.width && (ny as usize) < self.config.height {
                a.pos = (nx as usize, ny as usize);
            }
            a.last_move = mv;
            a.last_attack = joint_action[i] >= 5;
        }

        // 2. Collection. Lower index goes first, so a shared food tile
        // yields to agent 0.
        for i in 0..2 {
            let pos = self.state.agents[i].pos;
            if pos == self.config.water_tile {
                let a = &mut self.state.agents[i];
                a.water = (a.water + YIELD).min(CAPACITY);
            }
            for (t, &tile) in self.config.food_tiles.iter().enumerate() {
                if pos == tile && self.state.food_countdowns[t] == 0 {
                    let a = &mut self.state.agents[i];
                    a.food = (a.food + YIELD).min(CAPACITY);
                    // Set to RECHARGE_TURNS + 1 because the end-of-step
                    // decrement below runs this turn too; the tile is then
                    // unavailable for exactly RECHARGE_TURNS turns.
                    self.state.food_countdowns[t] = RECHARGE_TURNS + 1;
                }
            }
        }

        // 3. Attacks, resolved simultaneously: steal/damage amounts are
        // computed from pre-attack supplies, then applied together.
        let mut food_delta = [0i32; 2];
        let mut water_delta = [0i32; 2];
        let mut damage = [0i32; 2];
        for i in 0..2 {
            if joint_action[i] < 5 {
                continue;
            }
            let j = 1 - i;
            let (pi, pj) = (self.state.agents[i].pos, self.state.agents[j].pos);
            let dist = (pi.0 as i32 - pj.0 as i32).abs().max((pi.1 as i32 - pj.1 as i32).abs());
            if dist > 1 {
                continue; // out of range; the attack whiffs
            }
            let steal_food = self.state.agents[j].food.min(1);
            let steal_water = self.state.agents[j].water.min(1);
            food_delta[j] -= steal_food;
            water_delta[j] -= steal_water;
            if !self.config.steal_destroys {
                food_delta[i] += steal_food;
                water_delta[i] += steal_water;
            }
            let crit = self.rng.gen::<f64>() < CRIT_PROB;
            damage[j] += if crit { 2 } else { 1 };
        }
        for i in 0..2 {
            let a = &mut self.state.agents[i];
            a.food = (a.food + food_delta[i]).clamp(0, CAPACITY);
            a.water = (a.water + water_delta[i]).clamp(0, CAPACITY);
            a.health -= damage[i];
        }

        // 4. Supply decay.
        for a in &mut self.state.agents {
            a.food = (a.food - 1).max(0);
            a.water = (a.water - 1).max(0);
        }

        // 5. Health update: −1 per fully absent supply, +1 regeneration when
        // both supplies sit above the threshold.
        for a in &mut self.state.agents {
            if a.food == 0 {
                a.health -= 1;
            }
            if a.water == 0 {
                a.health -= 1;
            }
            if a.food > REGEN_THRESHOLD && a.water > REGEN_THRESHOLD {
                a.health = (a.health + 1).min(MAX_HEALTH);
            }
        }

        // 6. Termination, respawn, survival bonus. An agent that dies this
        // step still lived through it, so the first-life metric counts the
        // step before the respawn flips `died_once`.
        self.last_metric =
            self.state.agents.iter().map(|a| if a.died_once { 0.0 } else { 1.0 }).collect();
        self.state.step += 1;
        let done = self.state.step == self.config.horizon;
        for i in 0..2 {
            if self.state.agents[i].health <= 0 {
                rewards[i] -= 1.0;
                terminated[i] = true;
                self.state.agents[i] = Self::fresh_agent(&self.config, i);
                self.state.agents[i].died_once = true;
            } else {
                self.state.agents[i].steps_alive += 1;
                if done {
                    rewards[i] += 1.0;
                    terminated[i] = true; // episode horizon reached
                }
            }
        }

        // 7. Food-tile recharge clock.
        for cd in &mut self.state.food_countdowns {
            if *cd > 0 {
                *cd -= 1;
            }
        }

        StepResult {
            rewards,
            global_state: self.global_state(),
            observations: (0..2).map(|i| self.observe(i)).collect(),
            terminated,
            done,
        }
    }

    fn observe(&self, agent: usize) -> Vec<f64> {
        assert!(agent < 2, "agent index {agent} out of range");
        self.features_in_order([agent, 1 - agent])
    }

    fn global_state(&self) -> Vec<f64> {
        let mut v = self.features_in_order([0, 1]);
        v.push(self.state.step as f64 / self.config.horizon as f64);
        v
    }

    /// Per-agent metric increment of the last step: 1 while the agent is in
    /// its first life, 0 after its first death. Summed over an episode this
    /// is the lifetime metric.
    fn metric_delta(&self) -> Vec<f64> {
        self.last_metric.clone()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> EldoradoEnv {
        let mut e = EldoradoEnv::new(EldoradoConfig::desk());
        e.reset(42);
        e
    }

    /// Desk layout with the agents adjacent, for attack tests.
    fn adjacent_env() -> EldoradoEnv {
        let mut config = EldoradoConfig::desk();
        config.spawns = [(1, 0), (1, 1)];
        let mut e = EldoradoEnv::new(config);
        e.reset(42);
        e
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = EldoradoEnv::new(EldoradoConfig::desk());
        let mut b = EldoradoEnv::new(EldoradoConfig::desk());
        assert_eq!(a.reset(7), b.reset(7));
        // Same action sequence → identical trajectories, bit-exact.
        for step in 0..50 {
            let act = [(step * 3) % 10, (step * 7 + 1) % 10];
            let ra = a.step(&act);
            let rb = b.step(&act);
            assert_eq!(ra.rewards, rb.rewards);
            assert_eq!(ra.observations, rb.observations);
            assert_eq!(ra.global_state, rb.global_state);
        }
    }

    #[test]
    fn observation_width_matches_layout() {
        let e = env();
        assert_eq!(e.obs_width(), 32);
        assert_eq!(e.observe(0).len(), 32);
        assert_eq!(e.observe(1).len(), 32);
        assert_eq!(e.global_state().len(), 33);
        // The full-scale layout keeps the original 28-element vector.
        let f = EldoradoEnv::new(EldoradoConfig::full());
        assert_eq!(f.obs_width(), 28);
        assert_eq!(f.global_state().len(), 29);
    }

    #[test]
    fn observations_are_egocentric() {
        let e = env();
        let o0 = e.observe(0);
        let o1 = e.observe(1);
        // Each agent's own x-position leads its observation; spawns differ.
        assert_ne!(o0[0], o1[0]);
        // Agent 0's view of itself equals agent 1's view of its neighbor.
        assert_eq!(o0[0..6], o1[6..12]);
    }

    #[test]
    fn food_tile_yields_six_then_recharges_six_turns() {
        let mut config = EldoradoConfig::desk();
        config.spawns = [(0, 3), (4, 4)]; // agent 0 one step below food (0, 2)
        let mut e = EldoradoEnv::new(config);
        e.reset(0);
        let food_before = e.state().agents[0].food;
        e.step(&[1, 0]); // move up onto the tile
        // +6 collected, −1 decay.
        assert_eq!(e.state().agents[0].food, food_before + YIELD - 1);
        assert_eq!(e.state().food_countdowns[0], RECHARGE_TURNS);
        // Standing on the tile during the recharge window yields nothing.
        for turn in 0..RECHARGE_TURNS {
            let before = e.state().agents[0].food;
            e.step(&[0, 0]);
            assert_eq!(e.state().agents[0].food, before - 1, "no yield during recharge turn {turn}");
        }
        // Recharge elapsed: the next stay collects again.
        assert_eq!(e.state().food_countdowns[0], 0);
        let before = e.state().agents[0].food;
        e.step(&[0, 0]);
        assert_eq!(e.state().agents[0].food, before + YIELD - 1);
    }

    #[test]
    fn water_tile_is_infinite() {
        let mut config = EldoradoConfig::desk();
        config.spawns = [(2, 2), (4, 4)]; // agent 0 on the water tile
        let mut e = EldoradoEnv::new(config);
        e.reset(0);
        for _ in 0..10 {
            e.step(&[0, 0]);
            assert!(e.state().agents[0].water >= REGEN_THRESHOLD, "water keeps flowing");
        }
    }

    #[test]
    fn attack_steals_one_unit_of_each_resource() {
        let mut e = adjacent_env();
        let (f0, w0) = (e.state().agents[0].food, e.state().agents[0].water);
        let (f1, w1) = (e.state().agents[1].food, e.state().agents[1].water);
        e.step(&[5, 0]); // agent 0 attacks in place; agent 1 stays
        // Victim: −1 steal −1 decay each; attacker: +1 steal −1 decay each.
        assert_eq!(e.state().agents[1].food, f1 - 2);
        assert_eq!(e.state().agents[1].water, w1 - 2);
        assert_eq!(e.state().agents[0].food, f0);
        assert_eq!(e.state().agents[0].water, w0);
        let hp = e.state().agents[1].health;
        assert!(hp == MAX_HEALTH - 1 || hp == MAX_HEALTH - 2, "damage 1, doubled at random");
    }

    #[test]
    fn attack_out_of_range_whiffs() {
        let mut e = env(); // spawns are far apart
        e.step(&[5, 5]);
        assert_eq!(e.state().agents[0].health, MAX_HEALTH);
        assert_eq!(e.state().agents[1].health, MAX_HEALTH);
    }

    #[test]
    fn simultaneous_attacks_damage_both() {
        let mut e = adjacent_env();
        e.step(&[5, 5]);
        assert!(e.state().agents[0].health < MAX_HEALTH);
        assert!(e.state().agents[1].health < MAX_HEALTH);
    }

    #[test]
    fn steal_destroys_flag_burns_the_loot() {
        let mut config = EldoradoConfig::desk();
        config.spawns = [(1, 0), (1, 1)];
        config.steal_destroys = true;
        let mut e = EldoradoEnv::new(config);
        e.reset(0);
        let f0 = e.state().agents[0].food;
        e.step(&[5, 0]);
        assert_eq!(e.state().agents[0].food, f0 - 1, "attacker gains nothing, only decays");
    }

    #[test]
    fn health_caps_and_supply_caps_hold() {
        let mut config = EldoradoConfig::desk();
        config.spawns = [(2, 2), (4, 4)]; // water tile camper
        let mut e = EldoradoEnv::new(config);
        e.reset(0);
        for _ in 0..40 {
            e.step(&[0, 0]);
            for a in 0..2 {
                let ag = &e.state().agents[a];
                assert!(ag.health <= MAX_HEALTH);
                assert!(ag.food <= CAPACITY && ag.water <= CAPACITY);
                assert!(ag.food >= 0 && ag.water >= 0);
            }
        }
    }

    #[test]
    fn starvation_kills_and_respawns_with_minus_one() {
        let mut e = env();
        // Nobody collects anything: supplies hit zero at step 16 (and the
        // health drain of 2 per turn starts that same step), so health runs
        // out on step 20.
        let mut death_step = None;
        for step in 1..=30 {
            let r = e.step(&[0, 0]);
            if r.terminated[0] && death_step.is_none() {
                death_step = Some(step);
                assert_eq!(r.rewards[0], -1.0);
                break;
            }
        }
        assert_eq!(death_step, Some(20), "supplies gone at 16, then 5 drain steps of 2");
        // Respawned fresh at the spawn cell.
        let a = &e.state().agents[0];
        assert_eq!(a.pos, e.config().spawns[0]);
        assert_eq!(a.health, MAX_HEALTH);
        assert_eq!(a.steps_alive, 0);
    }

    #[test]
    fn health_regenerates_only_above_threshold() {
        let mut e = env();
        // Wounded agent with threshold supplies: no regeneration. The decay
        // phase runs before the health update, so supplies must exceed the
        // threshold after decaying.
        e.agent_mut(0).health = 5;
        e.agent_mut(0).food = REGEN_THRESHOLD + 1;
        e.agent_mut(0).water = REGEN_THRESHOLD + 1;
        e.step(&[0, 0]); // decays to exactly the threshold → no regen
        assert_eq!(e.state().agents[0].health, 5);
        // Well-stocked wounded agent: +1 health per turn.
        e.agent_mut(0).food = REGEN_THRESHOLD + 5;
        e.agent_mut(0).water = REGEN_THRESHOLD + 5;
        e.step(&[0, 0]);
        assert_eq!(e.state().agents[0].health, 6, "regeneration above threshold");
        // Regeneration never exceeds the cap.
        e.agent_mut(0).health = MAX_HEALTH;
        e.step(&[0, 0]);
        assert_eq!(e.state().agents[0].health, MAX_HEALTH);
    }

    #[test]
    fn survival_bonus_at_horizon() {
        let mut config = EldoradoConfig::desk();
        config.horizon = 10; // short episode: everyone survives
        let mut e = EldoradoEnv::new(config);
        e.reset(0);
        for _ in 0..9 {
            let r = e.step(&[0, 0]);
            assert!(!r.done);
        }
        let r = e.step(&[0, 0]);
        assert!(r.done);
        assert_eq!(r.rewards, vec![1.0, 1.0], "+1 for surviving the episode");
    }

    #[test]
    fn metric_counts_first_life_only() {
        let mut config = EldoradoConfig::desk();
        config.horizon = 40;
        let mut e = EldoradoEnv::new(config);
        e.reset(0);
        let mut lifetime = [0.0, 0.0];
        for _ in 0..40 {
            e.step(&[0, 0]);
            lifetime[0] += e.metric_delta()[0];
            lifetime[1] += e.metric_delta()[1];
        }
        // Both agents starve at step 20 and never count afterwards.
        assert_eq!(lifetime, [20.0, 20.0]);
    }

    #[test]
    #[should_panic(expected = "action out of range")]
    fn step_rejects_out_of_range_action() {
        let mut e = env();
        let _ = e.step(&[10, 0]);
    }
}
