//! Experiment orchestration: typed configuration with strict parsing,
//! algorithm dispatch across both frameworks, seeded training runs with
//! periodic greedy evaluation, append-only metric logs, λ-sweep tables for
//! the matrix game, checkpoints, and the analytic verification suite.

use crate::ac_framework::{coma_advantage, ACAlgorithm, ACParams, ACTrainer};
use crate::envs::{
    enumerate_allocator_outcomes, termination_toy_values, AllocatorEnv, EldoradoConfig, EldoradoEnv, Environment,
    HarvestConfig, HarvestEnv, MatrixGameSpec, TerminationToyEnv,
};
use crate::numerics::{
    finite_difference_grads, grad_check, ppo_loss, Activation, DenseNetwork,
};
use crate::q_framework::{MixingAssembly, QAlgorithm, QParams, QTrainer, SocialMode};
use crate::rng::{stream_rng, Stream};
use crate::tabular::{exact_policy_eval, factorization_check, mpd_sweep, random_game, random_policies};
use crate::welfare::{gini, SWChoice};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, Write as _};
use std::path::{Path, PathBuf};

/// Everything that can go wrong before training starts. Parse and
/// validation failures map to exit code 1 in the CLI.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Trainable environments addressable from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvName {
    Harvest,
    Eldorado,
    Allocator,
    Termination,
}

impl EnvName {
    pub fn as_str(self) -> &'static str {
        match self {
            EnvName::Harvest => "harvest",
            EnvName::Eldorado => "eldorado",
            EnvName::Allocator => "allocator",
            EnvName::Termination => "termination",
        }
    }
}

/// Which learner family runs the experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Framework {
    Q,
    Ac,
}

impl Framework {
    pub fn as_str(self) -> &'static str {
        match self {
            Framework::Q => "q",
            Framework::Ac => "ac",
        }
    }
}

/// Algorithm variants, shared by both frameworks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmName {
    Barocco,
    Crs,
    Vanilla,
    Selfish,
}

impl AlgorithmName {
    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmName::Barocco => "barocco",
            AlgorithmName::Crs => "crs",
            AlgorithmName::Vanilla => "vanilla",
            AlgorithmName::Selfish => "selfish",
        }
    }
}

/// Environment size: `desk` runs in seconds on one core, `full` matches the
/// larger layouts and horizons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Desk,
    Full,
}

/// One experiment, fully specified. The file format is flat TOML with
/// typed values; every field has a default, and unknown keys are rejected
/// so a typo cannot silently fall back to a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub environment: EnvName,
    pub scale: Scale,
    pub framework: Framework,
    pub algorithm: AlgorithmName,
    pub sw: SWChoice,
    /// Prosociality coefficient λ; forced to 0 by `selfish` and to 1 by
    /// `vanilla`.
    pub lambda: f64,
    pub gamma: f64,
    pub seed: u64,
    pub total_steps: u64,
    /// Environment steps between greedy evaluations.
    pub eval_interval: u64,
    pub eval_episodes: usize,

    /// Hidden widths shared by all per-agent networks.
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub lr_decay: f64,

    // Q-framework hyperparameters.
    pub n_step: usize,
    pub buffer_capacity: usize,
    pub min_buffer: usize,
    pub selfish_batch: usize,
    pub social_batch: usize,
    pub mixing_embed: usize,
    pub hyper_hidden: usize,
    pub train_every: usize,
    pub target_period: u64,
    pub eps_start: f64,
    pub eps_decay: f64,
    pub eps_floor: f64,
    pub prioritization: Option<f64>,
    pub fingerprint: bool,

    // Actor-critic hyperparameters.
    pub rollout_len: usize,
    pub minibatch: usize,
    pub epochs: usize,
    pub clip: f64,
    pub entropy_start: f64,
    pub entropy_end: f64,
    pub entropy_anneal_steps: u64,
    pub policy_lr: f64,
    pub critic_lr: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let q = QParams::desk(QAlgorithm::Barocco, 1.0, SWChoice::Sum);
        let ac = ACParams::desk(ACAlgorithm::Barocco, 1.0, SWChoice::Sum);
        ExperimentConfig {
            environment: EnvName::Harvest,
            scale: Scale::Desk,
            framework: Framework::Q,
            algorithm: AlgorithmName::Barocco,
            sw: SWChoice::Sum,
            lambda: 1.0,
            gamma: q.gamma,
            seed: 0,
            total_steps: 20_000,
            eval_interval: 1_000,
            eval_episodes: 2,
            hidden: q.hidden.clone(),
            learning_rate: q.learning_rate,
            lr_decay: q.lr_decay,
            n_step: q.n_step,
            buffer_capacity: q.buffer_capacity,
            min_buffer: q.min_buffer,
            selfish_batch: q.selfish_batch,
            social_batch: q.social_batch,
            mixing_embed: q.mixing_embed,
            hyper_hidden: q.hyper_hidden,
            train_every: q.train_every,
            target_period: q.target_period,
            eps_start: q.eps_start,
            eps_decay: q.eps_decay,
            eps_floor: q.eps_floor,
            prioritization: q.prioritization,
            fingerprint: q.fingerprint,
            rollout_len: ac.rollout_len,
            minibatch: ac.minibatch,
            epochs: ac.epochs,
            clip: ac.clip,
            entropy_start: ac.entropy_start,
            entropy_end: ac.entropy_end,
            entropy_anneal_steps: ac.entropy_anneal_steps,
            policy_lr: ac.policy_lr,
            critic_lr: ac.critic_lr,
        }
    }
}

impl ExperimentConfig {
    /// Parses a flat TOML document; unknown keys are errors.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Applies the algorithm-implied constraints: the selfish baseline is
    /// the method at λ = 0 and the vanilla cooperative baselines are the
    /// method at λ = 1, so those algorithms pin λ.
    pub fn normalized(&self) -> Self {
        let mut cfg = self.clone();
        match cfg.algorithm {
            AlgorithmName::Selfish => cfg.lambda = 0.0,
            AlgorithmName::Vanilla => cfg.lambda = 1.0,
            _ => {}
        }
        cfg
    }

    /// Full validation; every rejection carries a named reason. The
    /// (framework, algorithm, sw) dispatch is total — all combinations run.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if !(0.0..=1.0).contains(&self.lambda) {
            return fail(format!("lambda {} outside [0, 1]", self.lambda));
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma {} outside [0, 1)", self.gamma));
        }
        if self.total_steps == 0 || self.eval_interval == 0 || self.eval_episodes == 0 {
            return fail("step counts and evaluation parameters must be positive".into());
        }
        if self.learning_rate <= 0.0 || self.policy_lr <= 0.0 || self.critic_lr <= 0.0 {
            return fail("learning rates must be positive".into());
        }
        if !(0.0 < self.lr_decay && self.lr_decay <= 1.0) {
            return fail(format!("lr_decay {} outside (0, 1]", self.lr_decay));
        }
        match self.framework {
            Framework::Q => {
                if self.n_step == 0 {
                    return fail("n_step must be at least 1".into());
                }
                if self.buffer_capacity == 0 || self.selfish_batch == 0 || self.social_batch == 0 {
                    return fail("buffer and batch sizes must be positive".into());
                }
                if self.min_buffer < self.selfish_batch.max(self.social_batch) {
                    return fail("min_buffer must be at least the largest batch size".into());
                }
                if self.train_every == 0 || self.target_period == 0 {
                    return fail("train_every and target_period must be positive".into());
                }
                if !(0.0..=1.0).contains(&self.eps_start)
                    || !(0.0 < self.eps_decay && self.eps_decay <= 1.0)
                    || self.eps_floor < 0.0
                    || self.eps_floor > self.eps_start
                {
                    return fail("exploration schedule outside its valid ranges".into());
                }
                if self.prioritization.is_some_and(|e| e < 0.0) {
                    return fail("prioritization exponent must be nonnegative".into());
                }
            }
            Framework::Ac => {
                if self.rollout_len == 0 || self.minibatch == 0 || self.minibatch > self.rollout_len {
                    return fail("minibatch must satisfy 1 <= minibatch <= rollout_len".into());
                }
                if self.epochs == 0 {
                    return fail("epochs must be at least 1".into());
                }
                if self.clip <= 0.0 {
                    return fail(format!("clip {} must be positive", self.clip));
                }
                if self.entropy_start < self.entropy_end || self.entropy_end < 0.0 {
                    return fail("entropy coefficient must anneal downward to a nonnegative value".into());
                }
                if self.entropy_anneal_steps == 0 {
                    return fail("entropy_anneal_steps must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the normalized serialized config, in lowercase hex. This
    /// is the identity written into log and checkpoint headers.
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.normalized().to_toml().as_bytes());
        let digest = hasher.finalize();
        let mut hex = String::with_capacity(64);
        for byte in digest {
            write!(hex, "{byte:02x}").expect("hex formatting");
        }
        hex
    }

    fn q_params(&self) -> QParams {
        let algorithm = match self.algorithm {
            AlgorithmName::Barocco => QAlgorithm::Barocco,
            AlgorithmName::Crs => QAlgorithm::Crs,
            AlgorithmName::Vanilla => QAlgorithm::Vanilla,
            AlgorithmName::Selfish => QAlgorithm::Selfish,
        };
        QParams {
            algorithm,
            lambda: self.lambda,
            sw: self.sw,
            mode: match algorithm {
                QAlgorithm::Vanilla => SocialMode::Short,
                _ => SocialMode::Long,
            },
            gamma: self.gamma,
            n_step: self.n_step,
            buffer_capacity: self.buffer_capacity,
            min_buffer: self.min_buffer,
            selfish_batch: self.selfish_batch,
            social_batch: self.social_batch,
            hidden: self.hidden.clone(),
            mixing_embed: self.mixing_embed,
            hyper_hidden: self.hyper_hidden,
            learning_rate: self.learning_rate,
            lr_decay: self.lr_decay,
            train_every: self.train_every,
            target_period: self.target_period,
            eps_start: self.eps_start,
            eps_decay: self.eps_decay,
            eps_floor: self.eps_floor,
            prioritization: self.prioritization,
            fingerprint: self.fingerprint,
        }
    }

    fn ac_params(&self) -> ACParams {
        let algorithm = match self.algorithm {
            AlgorithmName::Barocco => ACAlgorithm::Barocco,
            AlgorithmName::Crs => ACAlgorithm::Crs,
            AlgorithmName::Vanilla => ACAlgorithm::Vanilla,
            AlgorithmName::Selfish => ACAlgorithm::Selfish,
        };
        ACParams {
            algorithm,
            lambda: self.lambda,
            sw: self.sw,
            mode: match algorithm {
                ACAlgorithm::Vanilla => SocialMode::Short,
                _ => SocialMode::Long,
            },
            gamma: self.gamma,
            rollout_len: self.rollout_len,
            minibatch: self.minibatch,
            epochs: self.epochs,
            clip: self.clip,
            entropy_start: self.entropy_start,
            entropy_end: self.entropy_end,
            entropy_anneal_steps: self.entropy_anneal_steps,
            hidden: self.hidden.clone(),
            policy_lr: self.policy_lr,
            critic_lr: self.critic_lr,
            lr_decay: self.lr_decay,
        }
    }
}

/// Instantiates the configured environment.
pub fn make_env(cfg: &ExperimentConfig) -> Box<dyn Environment> {
    match (cfg.environment, cfg.scale) {
        (EnvName::Harvest, Scale::Desk) => Box::new(HarvestEnv::new(HarvestConfig::desk())),
        (EnvName::Harvest, Scale::Full) => Box::new(HarvestEnv::new(HarvestConfig::full())),
        (EnvName::Eldorado, Scale::Desk) => Box::new(EldoradoEnv::new(EldoradoConfig::desk())),
        (EnvName::Eldorado, Scale::Full) => Box::new(EldoradoEnv::new(EldoradoConfig::full())),
        (EnvName::Allocator, _) => Box::new(AllocatorEnv::new()),
        (EnvName::Termination, _) => Box::new(TerminationToyEnv::new(3, 7)),
    }
}

/// One evaluation snapshot, the unit of the metric log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    /// Environment steps of training completed when this row was measured.
    pub step: u64,
    /// Mean per-agent episodic payoff over the evaluation episodes.
    pub payoffs: Vec<f64>,
    /// Sum of the per-agent payoffs.
    pub total: f64,
    /// Mean environment score per episode: total apples in Harvest, total
    /// lifetime in Eldorado, 0 where the environment defines no score.
    pub score: f64,
    /// 1 − Gini of the per-agent payoffs (payoffs shifted into nonnegative
    /// range first, since Gini is defined for nonnegative values).
    pub fairness: f64,
    /// Mean per-agent first-life length in steps.
    pub episode_lengths: Vec<f64>,
}

impl MetricRow {
    /// Column names for `n` agents, matching [`MetricRow::csv_line`].
    pub fn columns(n: usize) -> String {
        let mut cols = String::from("step");
        for i in 0..n {
            write!(cols, ",payoff_{i}").expect("string write");
        }
        cols.push_str(",total,score,fairness");
        for i in 0..n {
            write!(cols, ",len_{i}").expect("string write");
        }
        cols
    }

    pub fn csv_line(&self) -> String {
        let mut line = format!("{}", self.step);
        for p in &self.payoffs {
            write!(line, ",{p}").expect("string write");
        }
        write!(line, ",{},{},{}", self.total, self.score, self.fairness).expect("string write");
        for l in &self.episode_lengths {
            write!(line, ",{l}").expect("string write");
        }
        line
    }
}

/// Fairness = 1 − Gini, with payoffs shifted into nonnegative range when
/// any are negative.
fn fairness_of(payoffs: &[f64]) -> f64 {
    let low = payoffs.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let shifted: Vec<f64> = payoffs.iter().map(|p| p - low).collect();
    1.0 - gini(&shifted)
}

/// Either framework's trainer behind one interface for the run loop. The
/// variants are boxed: one trainer exists per run and the structs are large.
enum AnyTrainer {
    Q(Box<QTrainer>),
    Ac(Box<ACTrainer>),
}

impl AnyTrainer {
    fn greedy_action(&self, agent: usize, obs: &[f64]) -> usize {
        match self {
            AnyTrainer::Q(t) => t.greedy_action(agent, obs),
            AnyTrainer::Ac(t) => t.mode_action(agent, obs),
        }
    }

    fn parameter_vector(&self) -> Vec<f64> {
        match self {
            AnyTrainer::Q(t) => t.parameter_vector(),
            AnyTrainer::Ac(t) => t.parameter_vector(),
        }
    }
}

/// Where a finished run left its outputs.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub rows: Vec<MetricRow>,
    pub log_path: PathBuf,
    pub checkpoint_path: PathBuf,
    pub config_hash: String,
}

/// Default log location: `$BAROCCO_OUT_DIR` (or `./runs`) plus a file name
/// derived from the run's identity.
fn default_log_path(cfg: &ExperimentConfig) -> PathBuf {
    let dir = std::env::var_os("BAROCCO_OUT_DIR").map(PathBuf::from).unwrap_or_else(|| PathBuf::from("runs"));
    dir.join(format!(
        "{}_{}_{}_{}_lam{:.2}_seed{}.csv",
        cfg.environment.as_str(),
        cfg.framework.as_str(),
        cfg.algorithm.as_str(),
        match cfg.sw {
            SWChoice::Sum => "sum",
            SWChoice::Min => "min",
        },
        cfg.lambda,
        cfg.seed
    ))
}

/// Trains one configuration to completion, evaluating greedily every
/// `eval_interval` steps and appending each [`MetricRow`] to the log as it
/// is produced. Fully deterministic per (config, seed).
///
/// The log is append-only: a fresh file gets a header line with the config
/// hash and column names; appending to an existing log requires the header
/// to match, so two different configs can never interleave in one file.
pub fn run(config: &ExperimentConfig, out_override: Option<&Path>) -> Result<RunArtifacts, ConfigError> {
    let cfg = config.normalized();
    cfg.validate()?;
    let hash = cfg.hash();

    let mut env = make_env(&cfg);
    let mut eval_env = make_env(&cfg);
    let num_agents = env.num_agents();
    let action_counts: Vec<usize> = (0..num_agents).map(|i| env.num_actions(i)).collect();
    let mut trainer = match cfg.framework {
        Framework::Q => AnyTrainer::Q(Box::new(QTrainer::new(
            cfg.q_params(),
            &action_counts,
            env.obs_width(),
            env.state_width(),
            cfg.seed,
        ))),
        Framework::Ac => AnyTrainer::Ac(Box::new(ACTrainer::new(
            cfg.ac_params(),
            &action_counts,
            env.obs_width(),
            env.state_width(),
            cfg.seed,
        ))),
    };

    let log_path = out_override.map(Path::to_path_buf).unwrap_or_else(|| default_log_path(&cfg));
    if let Some(parent) = log_path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let header = format!("# {},{}", hash, MetricRow::columns(num_agents));
    let existing = fs::metadata(&log_path).map(|m| m.len()).unwrap_or(0);
    if existing > 0 {
        let first = BufReader::new(fs::File::open(&log_path)?)
            .lines()
            .next()
            .transpose()?
            .unwrap_or_default();
        if first != header {
            return Err(ConfigError::Invalid(format!(
                "log file {} belongs to a different config",
                log_path.display()
            )));
        }
    }
    let mut log = fs::OpenOptions::new().create(true).append(true).open(&log_path)?;
    if existing == 0 {
        writeln!(log, "{header}")?;
    }

    // Episode seeds for training and evaluation come from separate streams
    // so adding evaluations never perturbs training.
    let mut train_seeds = stream_rng(cfg.seed, Stream::Env);
    let mut eval_seeds = stream_rng(cfg.seed, Stream::Eval);

    let mut obs = env.reset(train_seeds.gen());
    let mut state = env.global_state();
    let mut rows = Vec::new();
    for step in 1..=cfg.total_steps {
        let mut actions = Vec::with_capacity(num_agents);
        let mut probs = Vec::with_capacity(num_agents);
        match &mut trainer {
            AnyTrainer::Q(t) => {
                for (i, o) in obs.iter().enumerate() {
                    actions.push(t.select_action(i, o));
                }
            }
            AnyTrainer::Ac(t) => {
                for (i, o) in obs.iter().enumerate() {
                    let (a, p) = t.sample_action(i, o);
                    actions.push(a);
                    probs.push(p);
                }
            }
        }
        let res = env.step(&actions);
        match &mut trainer {
            AnyTrainer::Q(t) => {
                t.record(
                    &obs,
                    &state,
                    &actions,
                    &res.rewards,
                    &res.observations,
                    &res.global_state,
                    &res.terminated,
                    res.done,
                );
                t.on_env_step();
            }
            AnyTrainer::Ac(t) => {
                t.record(
                    &obs,
                    &state,
                    &actions,
                    &probs,
                    &res.rewards,
                    &res.observations,
                    &res.global_state,
                    &res.terminated,
                    res.done,
                );
            }
        }
        if res.done {
            obs = env.reset(train_seeds.gen());
            state = env.global_state();
        } else {
            obs = res.observations;
            state = res.global_state;
        }

        if step % cfg.eval_interval == 0 {
            let row = evaluate(&cfg, &trainer, eval_env.as_mut(), step, &mut eval_seeds);
            writeln!(log, "{}", row.csv_line())?;
            rows.push(row);
        }
    }
    log.flush()?;

    let checkpoint_path = log_path.with_extension("ckpt");
    save_checkpoint(&checkpoint_path, &hash, &trainer.parameter_vector())?;
    Ok(RunArtifacts { rows, log_path, checkpoint_path, config_hash: hash })
}

/// Runs `eval_episodes` greedy episodes and aggregates them into one row.
fn evaluate(
    cfg: &ExperimentConfig,
    trainer: &AnyTrainer,
    env: &mut dyn Environment,
    step: u64,
    eval_seeds: &mut ChaCha8Rng,
) -> MetricRow {
    let n = env.num_agents();
    let mut payoffs = vec![0.0; n];
    let mut lengths = vec![0.0; n];
    let mut score = 0.0;
    for _ in 0..cfg.eval_episodes {
        let mut obs = env.reset(eval_seeds.gen());
        let mut alive = vec![true; n];
        loop {
            let actions: Vec<usize> = (0..n).map(|i| trainer.greedy_action(i, &obs[i])).collect();
            let res = env.step(&actions);
            score += env.metric_delta().iter().sum::<f64>();
            for i in 0..n {
                payoffs[i] += res.rewards[i];
                if alive[i] {
                    lengths[i] += 1.0;
                    if res.terminated[i] {
                        alive[i] = false;
                    }
                }
            }
            obs = res.observations;
            if res.done {
                break;
            }
        }
    }
    let episodes = cfg.eval_episodes as f64;
    for p in payoffs.iter_mut().chain(lengths.iter_mut()) {
        *p /= episodes;
    }
    let total = payoffs.iter().sum();
    MetricRow {
        step,
        fairness: fairness_of(&payoffs),
        total,
        score: score / episodes,
        payoffs,
        episode_lengths: lengths,
    }
}

const CHECKPOINT_MAGIC: &str = "barocco-checkpoint v1";

/// Writes a versioned parameter dump: magic line, config hash, parameter
/// count, then one exact hex-encoded f64 per line (no rounding on reload).
pub fn save_checkpoint(path: &Path, config_hash: &str, params: &[f64]) -> Result<(), ConfigError> {
    let mut text = format!("{CHECKPOINT_MAGIC}\n{config_hash}\n{}\n", params.len());
    for p in params {
        writeln!(text, "{:016x}", p.to_bits()).expect("string write");
    }
    fs::write(path, text)?;
    Ok(())
}

/// Reads a checkpoint back as (config hash, parameters).
pub fn load_checkpoint(path: &Path) -> Result<(String, Vec<f64>), ConfigError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(ConfigError::Invalid(format!("{} is not a checkpoint", path.display())));
    }
    let hash = lines
        .next()
        .ok_or_else(|| ConfigError::Invalid("checkpoint missing config hash".into()))?
        .to_string();
    let count: usize = lines
        .next()
        .and_then(|l| l.parse().ok())
        .ok_or_else(|| ConfigError::Invalid("checkpoint missing parameter count".into()))?;
    let params: Vec<f64> = lines
        .map(|l| u64::from_str_radix(l, 16).map(f64::from_bits))
        .collect::<Result<_, _>>()
        .map_err(|e| ConfigError::Invalid(format!("corrupt checkpoint payload: {e}")))?;
    if params.len() != count {
        return Err(ConfigError::Invalid(format!(
            "checkpoint declares {count} parameters but carries {}",
            params.len()
        )));
    }
    Ok((hash, params))
}

/// Parses a sweep grid of the form `start:end:step` into explicit λ values
/// (inclusive of both ends; values are rounded to cancel accumulation
/// error, e.g. `0:1:0.1` yields exactly 0.1·k).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, ConfigError> {
    let parts: Vec<&str> = text.split(':').collect();
    if parts.len() != 3 {
        return Err(ConfigError::Invalid(format!("grid '{text}' is not start:end:step")));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| ConfigError::Invalid(format!("grid '{text}': {e}")))?;
    let (start, end, step) = (nums[0], nums[1], nums[2]);
    if step <= 0.0 || end < start {
        return Err(ConfigError::Invalid(format!("grid '{text}' must ascend with positive step")));
    }
    let count = ((end - start) / step).round() as usize;
    if (start + count as f64 * step - end).abs() > 1e-9 {
        return Err(ConfigError::Invalid(format!("grid '{text}': step does not divide the range")));
    }
    Ok((0..=count).map(|k| ((start + k as f64 * step) * 1e9).round() / 1e9).collect())
}

/// Runs the matrix-game λ sweep and renders it as a CSV table with action
/// labels (D / C / S).
pub fn mpd_sweep_table(grid: &[f64], seeds: &[u64]) -> String {
    let game = MatrixGameSpec::modified_pd();
    let mut table = String::from("lambda,seed,agent_0,agent_1\n");
    for row in mpd_sweep(grid, seeds) {
        writeln!(
            table,
            "{},{},{},{}",
            row.lambda,
            row.seed,
            game.action_name(0, row.joint_action[0]),
            game.action_name(1, row.joint_action[1])
        )
        .expect("string write");
    }
    table
}

/// One entry of the verification report.
#[derive(Debug, Clone)]
pub struct VerifyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl VerifyCheck {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        VerifyCheck { name, passed, detail }
    }
}

/// The analytic oracle suite behind `verify`: closed-form environment
/// values, the value-factorization identity, welfare commutativity, mixing
/// monotonicity, gradient correctness, and the PPO loss table. Every check
/// is deterministic; a fresh checkout passes all of them.
pub fn run_verification() -> Vec<VerifyCheck> {
    let mut checks = Vec::new();

    // Allocator closed forms across a γ sweep.
    {
        let mut max_err = 0.0f64;
        for &g in &[0.5, 0.9, 0.99] {
            for o in enumerate_allocator_outcomes(g) {
                let repeat = o.option[0] == o.option[1];
                let expect_sum = if repeat { 1.0 + 2.0 * g } else { 1.0 + g };
                let expect_min_long = if repeat { 0.0 } else { g };
                max_err = max_err
                    .max((o.v_short_sum - expect_sum).abs())
                    .max((o.v_long_sum - expect_sum).abs())
                    .max(o.v_short_min.abs())
                    .max((o.v_long_min - expect_min_long).abs());
            }
        }
        checks.push(VerifyCheck::new(
            "allocator-closed-forms",
            max_err < 1e-12,
            format!("max |err| = {max_err:.2e} over gamma in {{0.5, 0.9, 0.99}}"),
        ));
    }

    // Termination toy: closed forms and T₂-independence of agent 1's
    // short-term social value.
    {
        let g: f64 = 0.95;
        let v = termination_toy_values(3, 7, g);
        let mut max_err = (v.v_selfish[0] + g.powi(3))
            .abs()
            .max((v.v_selfish[1] + g.powi(7)).abs())
            .max((v.v_short[1] + g.powi(3) + g.powi(7)).abs())
            .max((v.v_long + g.powi(3) + g.powi(7)).abs());
        for t2 in [5, 20] {
            max_err = max_err.max((termination_toy_values(3, t2, g).v_short[0] - v.v_short[0]).abs());
        }
        checks.push(VerifyCheck::new(
            "termination-toy",
            max_err < 1e-12,
            format!("max |err| = {max_err:.2e}, short-term value of agent 0 independent of T2"),
        ));
    }

    // Factorization identity and sum commutativity on random games.
    {
        let mut rng = stream_rng(2024, Stream::Custom(900));
        let mut max_fact = 0.0f64;
        let mut max_comm = 0.0f64;
        for _ in 0..50 {
            let states = rng.gen_range(1..=4);
            let game = random_game(states, &[2, 2], 0.9, &mut rng);
            let policies = random_policies(&game, &mut rng);
            for &lambda in &[0.0, 0.25, 0.5, 0.75, 1.0] {
                max_fact = max_fact.max(factorization_check(&game, &policies, lambda));
            }
            let eval = exact_policy_eval(&game, &policies);
            for s in 0..states {
                max_comm = max_comm.max((eval.v_short_sum[s] - eval.v_long_sum[s]).abs());
            }
        }
        checks.push(VerifyCheck::new(
            "factorization-identity",
            max_fact < 1e-10,
            format!("max deviation = {max_fact:.2e} over 50 games x 5 lambdas"),
        ));
        let table = enumerate_allocator_outcomes(0.9);
        let min_diverges = table
            .iter()
            .filter(|o| o.option[0] != o.option[1])
            .all(|a| table.iter().filter(|o| o.option[0] == o.option[1]).all(|r| a.v_long_min > r.v_long_min))
            && table.iter().all(|o| o.v_short_min == 0.0);
        checks.push(VerifyCheck::new(
            "sum-commutativity",
            max_comm < 1e-10 && min_diverges,
            format!("max |short - long| = {max_comm:.2e} for sum; min diverges on the allocator"),
        ));
    }

    // Mixing monotonicity by finite differences.
    {
        let mut rng = stream_rng(2024, Stream::Custom(901));
        let mut min_slope = f64::INFINITY;
        for _ in 0..10 {
            let assembly = MixingAssembly::new(4, 5, &[2, 2], &[8], 8, 16, 1e-3, 1.0, &mut rng);
            for _ in 0..100 {
                let state: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let contributions: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
                for i in 0..2 {
                    let h = 1e-5;
                    let mut up = contributions.clone();
                    up[i] += h;
                    let mut down = contributions.clone();
                    down[i] -= h;
                    let slope = (assembly.mix_single(&up, &state) - assembly.mix_single(&down, &state)) / (2.0 * h);
                    min_slope = min_slope.min(slope);
                }
            }
        }
        checks.push(VerifyCheck::new(
            "mixing-monotonicity",
            min_slope >= -1e-9,
            format!("min finite-difference slope = {min_slope:.3e} over 1000 probes"),
        ));
    }

    // Counterfactual baseline zero-mean.
    {
        let mut rng = stream_rng(2024, Stream::Custom(902));
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let n = rng.gen_range(2..=6);
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let mut p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = p.iter().sum();
            for x in &mut p {
                *x /= total;
            }
            let mean: f64 = (0..n).map(|a| p[a] * coma_advantage(&q, &p, a)).sum();
            worst = worst.max(mean.abs());
        }
        checks.push(VerifyCheck::new(
            "counterfactual-zero-mean",
            worst < 1e-9,
            format!("max |E[A]| = {worst:.2e} over 1000 critic/policy pairs"),
        ));
    }

    // Gradient checks on random networks, plus a deliberate mutation that
    // the comparison must catch.
    {
        let mut rng = stream_rng(2024, Stream::Custom(903));
        let mut worst = 0.0f64;
        for k in 0..20 {
            let widths = vec![rng.gen_range(2..=4), rng.gen_range(3..=6), rng.gen_range(1..=3)];
            let output = if k % 2 == 0 { Activation::Identity } else { Activation::Softmax };
            let net = DenseNetwork::init_orthogonal(&widths, output, 1.0, &mut rng);
            let batch = rng.gen_range(1..=3);
            let input: Vec<f64> = (0..batch * widths[0]).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss = |out: &[f64]| out.iter().map(|o| o * o).sum::<f64>();
            let loss_grad = |out: &[f64]| out.iter().map(|o| 2.0 * o).collect::<Vec<f64>>();
            let report = grad_check(&net, &input, batch, &loss, &loss_grad, 1e-5, 1e-4);
            worst = worst.max(report.max_relative_error);
        }
        let detected = {
            let net = DenseNetwork::init_orthogonal(&[3, 4, 2], Activation::Identity, 1.0, &mut rng);
            let input: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let loss = |out: &[f64]| out.iter().map(|o| o * o).sum::<f64>();
            let (out, cache) = net.forward(&input, 1);
            let grads = net.backward(&cache, &out.iter().map(|o| 2.0 * o).collect::<Vec<f64>>());
            let numeric = finite_difference_grads(&net, &input, 1, &loss, 1e-5);
            let mut max_rel = 0.0f64;
            for idx in 0..net.num_params() {
                // Inject a sign flip into the first analytic entry.
                let a = DenseNetwork::get_grad(&grads, idx) * if idx == 0 { -1.0 } else { 1.0 };
                let n = numeric[idx];
                max_rel = max_rel.max((a - n).abs() / a.abs().max(n.abs()).max(1.0));
            }
            max_rel > 1e-4
        };
        checks.push(VerifyCheck::new(
            "gradient-check",
            worst < 1e-4 && detected,
            format!("max relative error = {worst:.2e} over 20 nets; injected error detected = {detected}"),
        ));
    }

    // PPO loss table and the clipped-branch gradient.
    {
        let cases = [
            (1.0, 2.0, 0.2, -2.0, -2.0),
            (2.0, 1.0, 0.2, -1.2, 0.0),
            (0.5, -1.0, 0.2, 0.8, 0.0),
        ];
        let mut ok = true;
        for &(ratio, adv, clip, want_loss, want_grad) in &cases {
            let (l, g) = ppo_loss(ratio, adv, clip);
            ok &= (l - want_loss).abs() < 1e-15 && g == want_grad;
        }
        checks.push(VerifyCheck::new(
            "ppo-loss-cases",
            ok,
            "three tabulated cases exact; inactive-branch gradient exactly 0".into(),
        ));
    }

    checks
}
