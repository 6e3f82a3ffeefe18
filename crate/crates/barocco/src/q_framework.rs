//! Q-learning side of the meta-algorithm: per-agent selfish Q-networks
//! trained by independent n-step double Q-learning, plus a joint social
//! component — per-agent contribution networks combined by a monotonic
//! mixing network whose weights are generated from the global state by
//! hypernetworks. Actions maximize the convex combination
//! `(1−λ)·Q_i + λ·Q_i^SW`, and monotonicity of the mixing makes that
//! per-agent argmax also maximize the joint social value.
//!
//! The same trainer covers:
//! - the full method (social targets from the vector of selfish TD targets),
//! - vanilla mixing-only learning (λ = 1, social targets from the one-step
//!   welfare bootstrap),
//! - reward mixing with independent learners (no social component; each
//!   agent learns on `(1−λ)·r_i + λ·SW(r)`),
//! - the selfish baseline (λ = 0).

use crate::numerics::{adam_step, argmax, Activation, AdamState, DenseNetwork, ForwardCache, Gradients};
use crate::rng::{stream_rng, Stream};
use crate::welfare::{crs_reward, social_welfare, SWChoice};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Which variant the trainer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QAlgorithm {
    /// Selfish and social components, social targets built from selfish TD
    /// targets (long-term social value).
    Barocco,
    /// Social component only drives behavior (λ = 1) with the one-step
    /// welfare bootstrap (short-term social value).
    Vanilla,
    /// Independent learners on the mixed reward; no social component.
    Crs,
    /// Independent selfish learners (λ = 0).
    Selfish,
}

/// Bootstrap form of the social target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SocialMode {
    /// `SW(r_t) + γ·Q^SW(s_{t+1}, a*)`: discounted stream of per-step
    /// welfare.
    Short,
    /// `SW(y_t)`: welfare of the vector of per-agent selfish targets.
    Long,
}

/// Hyperparameters of the Q-framework trainer.
#[derive(Debug, Clone)]
pub struct QParams {
    pub algorithm: QAlgorithm,
    /// Prosociality coefficient λ ∈ [0, 1].
    pub lambda: f64,
    pub sw: SWChoice,
    pub mode: SocialMode,
    pub gamma: f64,
    /// Horizon of the selfish n-step returns (the social bootstrap is
    /// always one-step).
    pub n_step: usize,
    pub buffer_capacity: usize,
    /// Transitions required in the buffer before training starts.
    pub min_buffer: usize,
    pub selfish_batch: usize,
    pub social_batch: usize,
    /// Hidden widths of the selfish and contribution networks.
    pub hidden: Vec<usize>,
    /// Width of the mixing hidden layer.
    pub mixing_embed: usize,
    /// Hidden width of the weight-generating hypernetworks.
    pub hyper_hidden: usize,
    pub learning_rate: f64,
    /// Multiplicative per-update learning-rate decay (1 = constant).
    pub lr_decay: f64,
    /// Environment steps between gradient updates.
    pub train_every: usize,
    /// Gradient updates between target-network synchronizations.
    pub target_period: u64,
    pub eps_start: f64,
    pub eps_decay: f64,
    pub eps_floor: f64,
    /// Proportional-prioritization exponent; `None` samples uniformly.
    pub prioritization: Option<f64>,
    /// Append the exploration rate ε to observations and global states so
    /// replayed experience is disambiguated by the policy that produced it.
    pub fingerprint: bool,
}

impl QParams {
    /// Desk-scale defaults for the given variant.
    pub fn desk(algorithm: QAlgorithm, lambda: f64, sw: SWChoice) -> Self {
        let mode = match algorithm {
            QAlgorithm::Vanilla => SocialMode::Short,
            _ => SocialMode::Long,
        };
        QParams {
            algorithm,
            lambda,
            sw,
            mode,
            gamma: 0.99,
            n_step: 3,
            buffer_capacity: 20_000,
            min_buffer: 500,
            selfish_batch: 64,
            social_batch: 128,
            hidden: vec![64, 64],
            mixing_embed: 32,
            hyper_hidden: 64,
            learning_rate: 5e-4,
            lr_decay: 1.0,
            train_every: 4,
            target_period: 2_000,
            eps_start: 1.0,
            eps_decay: 0.9995,
            eps_floor: 0.02,
            prioritization: None,
            fingerprint: false,
        }
    }

    fn validate(&self) {
        assert!((0.0..=1.0).contains(&self.lambda), "λ {} outside [0, 1]", self.lambda);
        assert!((0.0..1.0).contains(&self.gamma), "γ {} outside [0, 1)", self.gamma);
        assert!(self.n_step >= 1, "n-step horizon must be positive");
        assert!(self.buffer_capacity >= 1, "buffer capacity must be positive");
        assert!(self.selfish_batch >= 1 && self.social_batch >= 1, "batch sizes must be positive");
        assert!(self.min_buffer >= self.selfish_batch.max(self.social_batch), "warmup below batch size");
        assert!(self.train_every >= 1 && self.target_period >= 1, "period parameters must be positive");
        assert!((0.0..=1.0).contains(&self.eps_start), "ε start outside [0, 1]");
        assert!(self.eps_decay > 0.0 && self.eps_decay <= 1.0, "ε decay outside (0, 1]");
        assert!(self.eps_floor >= 0.0 && self.eps_floor <= self.eps_start, "ε floor above start");
        if let Some(exp) = self.prioritization {
            assert!(exp >= 0.0, "prioritization exponent must be nonnegative");
        }
        match self.algorithm {
            QAlgorithm::Vanilla => {
                assert_eq!(self.lambda, 1.0, "vanilla mixing requires λ = 1");
                assert_eq!(self.mode, SocialMode::Short, "vanilla mixing uses the short target");
            }
            QAlgorithm::Selfish => assert_eq!(self.lambda, 0.0, "selfish baseline requires λ = 0"),
            _ => {}
        }
    }

    /// Whether this variant trains a social component at all.
    pub fn has_social(&self) -> bool {
        matches!(self.algorithm, QAlgorithm::Barocco | QAlgorithm::Vanilla)
    }
}

/// Exploration-rate schedule: multiplicative decay to a floor.
#[derive(Debug, Clone)]
pub struct EpsSchedule {
    pub eps: f64,
    pub decay: f64,
    pub floor: f64,
}

impl EpsSchedule {
    pub fn new(start: f64, decay: f64, floor: f64) -> Self {
        assert!((0.0..=1.0).contains(&start), "ε must start in [0, 1]");
        assert!(decay > 0.0 && decay <= 1.0, "decay must lie in (0, 1]");
        assert!(floor >= 0.0 && floor <= start, "floor must lie in [0, start]");
        EpsSchedule { eps: start, decay, floor }
    }

    /// Advances the schedule one step; ε never increases and never drops
    /// below the floor.
    pub fn step(&mut self) {
        self.eps = (self.eps * self.decay).max(self.floor);
    }
}

/// One stored environment transition, shared by all agents.
#[derive(Debug, Clone)]
pub struct StoredTransition {
    /// Per-agent observations before the step (fingerprint included when
    /// enabled).
    pub obs: Vec<Vec<f64>>,
    pub state: Vec<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<Vec<f64>>,
    pub next_state: Vec<f64>,
    /// Per-agent life-end flags; value bootstraps are cut here even when the
    /// agent respawns immediately.
    pub terminated: Vec<bool>,
    pub done: bool,
    /// Episode counter and position, used to assemble n-step chains from
    /// consecutive transitions of one episode.
    pub episode: u64,
    pub step_in_episode: usize,
}

/// Ring buffer of transitions with n-step chain assembly and optional
/// proportional prioritization.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    n_step: usize,
    data: Vec<StoredTransition>,
    /// Next write position once the ring is full.
    head: usize,
    /// Per-slot priorities (|TD error| based); all 1 until told otherwise.
    priorities: Vec<f64>,
    exponent: Option<f64>,
    max_priority: f64,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, n_step: usize, exponent: Option<f64>) -> Self {
        assert!(capacity >= 1, "capacity must be positive");
        assert!(n_step >= 1, "n-step horizon must be positive");
        ReplayBuffer {
            capacity,
            n_step,
            data: Vec::new(),
            head: 0,
            priorities: Vec::new(),
            exponent,
            max_priority: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, idx: usize) -> &StoredTransition {
        &self.data[idx]
    }

    /// Appends a transition, overwriting the oldest once full. New entries
    /// get the running maximum priority so they are sampled at least once.
    pub fn push(&mut self, t: StoredTransition) {
        if self.data.len() < self.capacity {
            self.data.push(t);
            self.priorities.push(self.max_priority);
        } else {
            self.data[self.head] = t;
            self.priorities[self.head] = self.max_priority;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Draws `batch` start indices, uniformly or proportionally to
    /// priority^exponent.
    pub fn sample_starts(&self, batch: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        assert!(!self.data.is_empty(), "cannot sample from an empty buffer");
        match self.exponent {
            None => (0..batch).map(|_| rng.gen_range(0..self.data.len())).collect(),
            Some(exp) => {
                let scaled: Vec<f64> = self.priorities.iter().map(|p| p.powf(exp)).collect();
                let mut cumulative = Vec::with_capacity(scaled.len());
                let mut total = 0.0;
                for p in &scaled {
                    total += p;
                    cumulative.push(total);
                }
                assert!(total > 0.0, "all priorities vanished");
                (0..batch)
                    .map(|_| {
                        let u = rng.gen_range(0.0..total);
                        cumulative.partition_point(|&c| c <= u).min(self.data.len() - 1)
                    })
                    .collect()
            }
        }
    }

    /// Indices of the n-step chain starting at `start`: consecutive slots of
    /// the same episode, cut at episode end and at the ring's write edge.
    pub fn chain(&self, start: usize) -> Vec<usize> {
        let mut indices = vec![start];
        let mut prev = start;
        while indices.len() < self.n_step {
            let t = &self.data[prev];
            if t.done {
                break;
            }
            let next = (prev + 1) % self.data.len();
            let cand = &self.data[next];
            if cand.episode != t.episode || cand.step_in_episode != t.step_in_episode + 1 {
                break;
            }
            indices.push(next);
            prev = next;
        }
        indices
    }

    /// Records a fresh priority for a sampled slot.
    pub fn update_priority(&mut self, idx: usize, priority: f64) {
        assert!(priority.is_finite() && priority >= 0.0, "invalid priority {priority}");
        // Small floor keeps zero-error transitions sampleable.
        let p = priority.max(1e-3);
        self.priorities[idx] = p;
        self.max_priority = self.max_priority.max(p);
    }
}

/// Online/target pair of one Q-network with its optimizer.
#[derive(Debug, Clone)]
pub struct AgentQNet {
    pub online: DenseNetwork,
    pub target: DenseNetwork,
    pub opt: AdamState,
}

impl AgentQNet {
    pub fn new(widths: &[usize], lr: f64, lr_decay: f64, rng: &mut impl Rng) -> Self {
        let online = DenseNetwork::init_uniform_fanin(widths, Activation::Identity, rng);
        let target = online.clone();
        let opt = AdamState::new(&online, lr, lr_decay);
        AgentQNet { online, target, opt }
    }

    /// Copies the online parameters into the target network.
    pub fn sync(&mut self) {
        self.target = self.online.clone();
    }
}

/// The four weight/bias generators of the mixing network.
#[derive(Debug, Clone)]
pub struct HyperSet {
    /// state → first-layer mixing weights (`embed × num_agents`, made
    /// nonnegative by absolute value).
    pub w1: DenseNetwork,
    /// state → first-layer bias (`embed`).
    pub b1: DenseNetwork,
    /// state → second-layer mixing weights (`embed`, nonnegative).
    pub w2: DenseNetwork,
    /// state → final scalar bias (sign-unconstrained).
    pub b2: DenseNetwork,
}

impl HyperSet {
    /// Weight generators get one hidden layer; bias generators are plain
    /// affine maps of the state.
    fn new(state_width: usize, num_agents: usize, embed: usize, hyper_hidden: usize, rng: &mut impl Rng) -> Self {
        HyperSet {
            w1: DenseNetwork::init_uniform_fanin(
                &[state_width, hyper_hidden, num_agents * embed],
                Activation::Identity,
                rng,
            ),
            b1: DenseNetwork::init_uniform_fanin(&[state_width, embed], Activation::Identity, rng),
            w2: DenseNetwork::init_uniform_fanin(
                &[state_width, hyper_hidden, embed],
                Activation::Identity,
                rng,
            ),
            b2: DenseNetwork::init_uniform_fanin(&[state_width, 1], Activation::Identity, rng),
        }
    }
}

/// Everything the mixing backward pass needs from a forward evaluation.
#[derive(Debug)]
pub struct MixCache {
    batch: usize,
    /// Contribution inputs `[batch × num_agents]`.
    q: Vec<f64>,
    /// Raw (signed) generated weights and their hypernet caches.
    w1_raw: Vec<f64>,
    w2_raw: Vec<f64>,
    w1_cache: ForwardCache,
    b1_cache: ForwardCache,
    w2_cache: ForwardCache,
    b2_cache: ForwardCache,
    /// Pre-activation of the mixing hidden layer `[batch × embed]`.
    hidden_pre: Vec<f64>,
}

/// Parameter gradients for the four hypernetworks.
pub struct HyperGrads {
    pub w1: Gradients,
    pub b1: Gradients,
    pub w2: Gradients,
    pub b2: Gradients,
}

fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

fn elu_deriv(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        x.exp()
    }
}

/// Social component: per-agent contribution networks plus the monotonic
/// state-conditioned mixing stack.
#[derive(Debug, Clone)]
pub struct MixingAssembly {
    pub num_agents: usize,
    pub embed: usize,
    /// Contribution networks mapping o_i → per-action social values.
    pub contributions: Vec<AgentQNet>,
    pub hyper: HyperSet,
    pub hyper_target: HyperSet,
    /// Optimizer states for w1, b1, w2, b2 in that order.
    pub hyper_opts: Vec<AdamState>,
}

impl MixingAssembly {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        obs_width: usize,
        state_width: usize,
        action_counts: &[usize],
        hidden: &[usize],
        embed: usize,
        hyper_hidden: usize,
        lr: f64,
        lr_decay: f64,
        rng: &mut impl Rng,
    ) -> Self {
        assert!(embed >= 1 && hyper_hidden >= 1, "mixing widths must be positive");
        let num_agents = action_counts.len();
        assert!(num_agents >= 1, "need at least one agent");
        let contributions: Vec<AgentQNet> = action_counts
            .iter()
            .map(|&actions| {
                let mut widths = vec![obs_width];
                widths.extend_from_slice(hidden);
                widths.push(actions);
                AgentQNet::new(&widths, lr, lr_decay, rng)
            })
            .collect();
        let hyper = HyperSet::new(state_width, num_agents, embed, hyper_hidden, rng);
        let hyper_target = hyper.clone();
        let hyper_opts = vec![
            AdamState::new(&hyper.w1, lr, lr_decay),
            AdamState::new(&hyper.b1, lr, lr_decay),
            AdamState::new(&hyper.w2, lr, lr_decay),
            AdamState::new(&hyper.b2, lr, lr_decay),
        ];
        MixingAssembly { num_agents, embed, contributions, hyper, hyper_target, hyper_opts }
    }

    /// Mixes per-agent contributions into joint social values over a batch.
    ///
    /// `contributions` is row-major `[batch × num_agents]`, `states`
    /// `[batch × state_width]`. Monotonicity in every contribution is
    /// guaranteed by taking absolute values of all generated weights; the
    /// hidden layer uses ELU, so contribution sums that stay nonnegative
    /// pass through unbent.
    pub fn mix(&self, contributions: &[f64], states: &[f64], batch: usize) -> (Vec<f64>, MixCache) {
        mix_forward(&self.hyper, self.num_agents, self.embed, contributions, states, batch)
    }

    /// `mix` with the target hypernetworks (for bootstrap values).
    pub fn mix_target(&self, contributions: &[f64], states: &[f64], batch: usize) -> Vec<f64> {
        mix_forward(&self.hyper_target, self.num_agents, self.embed, contributions, states, batch).0
    }

    /// Single-sample convenience wrapper around [`MixingAssembly::mix`].
    pub fn mix_single(&self, contributions: &[f64], state: &[f64]) -> f64 {
        self.mix(contributions, state, 1).0[0]
    }

    /// Backpropagates `output_grad` (one entry per batch row) through the
    /// mixing stack: returns the gradient w.r.t. the contributions
    /// (`[batch × num_agents]`) and the hypernetwork parameter gradients.
    pub fn mix_backward(&self, cache: &MixCache, output_grad: &[f64]) -> (Vec<f64>, HyperGrads) {
        assert_eq!(output_grad.len(), cache.batch, "one output gradient per row");
        let n = self.num_agents;
        let e = self.embed;
        let b = cache.batch;
        let mut d_q = vec![0.0; b * n];
        let mut d_w1_raw = vec![0.0; b * n * e];
        let mut d_b1 = vec![0.0; b * e];
        let mut d_w2_raw = vec![0.0; b * e];
        for row in 0..b {
            let g = output_grad[row];
            for j in 0..e {
                let pre = cache.hidden_pre[row * e + j];
                let hidden = elu(pre);
                let w2_raw = cache.w2_raw[row * e + j];
                d_w2_raw[row * e + j] = g * hidden * sign(w2_raw);
                // Gradient into the hidden unit, through ELU.
                let d_pre = g * w2_raw.abs() * elu_deriv(pre);
                d_b1[row * e + j] = d_pre;
                for i in 0..n {
                    let w1_raw = cache.w1_raw[row * (n * e) + j * n + i];
                    d_w1_raw[row * (n * e) + j * n + i] = d_pre * cache.q[row * n + i] * sign(w1_raw);
                    d_q[row * n + i] += d_pre * w1_raw.abs();
                }
            }
        }
        let grads = HyperGrads {
            w1: self.hyper.w1.backward(&cache.w1_cache, &d_w1_raw),
            b1: self.hyper.b1.backward(&cache.b1_cache, &d_b1),
            w2: self.hyper.w2.backward(&cache.w2_cache, &d_w2_raw),
            b2: self.hyper.b2.backward(&cache.b2_cache, output_grad),
        };
        (d_q, grads)
    }

    /// Applies accumulated hypernetwork gradients.
    pub fn apply_hyper_grads(&mut self, grads: &HyperGrads) {
        adam_step(&mut self.hyper.w1, &grads.w1, &mut self.hyper_opts[0]);
        adam_step(&mut self.hyper.b1, &grads.b1, &mut self.hyper_opts[1]);
        adam_step(&mut self.hyper.w2, &grads.w2, &mut self.hyper_opts[2]);
        adam_step(&mut self.hyper.b2, &grads.b2, &mut self.hyper_opts[3]);
    }

    pub fn sync_targets(&mut self) {
        for c in &mut self.contributions {
            c.sync();
        }
        self.hyper_target = self.hyper.clone();
    }
}

/// Derivative factor of |x|; the kink at 0 uses 0, which keeps generated
/// zero weights at zero instead of nudging them by an arbitrary sign.
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn mix_forward(
    hyper: &HyperSet,
    num_agents: usize,
    embed: usize,
    contributions: &[f64],
    states: &[f64],
    batch: usize,
) -> (Vec<f64>, MixCache) {
    assert_eq!(
        contributions.len(),
        batch * num_agents,
        "expected one contribution per agent per row"
    );
    assert_eq!(states.len() % batch, 0, "state batch shape mismatch");
    let (w1_raw, w1_cache) = hyper.w1.forward(states, batch);
    let (b1, b1_cache) = hyper.b1.forward(states, batch);
    let (w2_raw, w2_cache) = hyper.w2.forward(states, batch);
    let (b2, b2_cache) = hyper.b2.forward(states, batch);
    let mut hidden_pre = vec![0.0; batch * embed];
    let mut output = vec![0.0; batch];
    for row in 0..batch {
        for j in 0..embed {
            let mut acc = b1[row * embed + j];
            for i in 0..num_agents {
                acc += w1_raw[row * (num_agents * embed) + j * num_agents + i].abs()
                    * contributions[row * num_agents + i];
            }
            hidden_pre[row * embed + j] = acc;
        }
        let mut out = b2[row];
        for j in 0..embed {
            out += w2_raw[row * embed + j].abs() * elu(hidden_pre[row * embed + j]);
        }
        output[row] = out;
    }
    let cache = MixCache {
        batch,
        q: contributions.to_vec(),
        w1_raw,
        w2_raw,
        w1_cache,
        b1_cache,
        w2_cache,
        b2_cache,
        hidden_pre,
    };
    (output, cache)
}

/// Loss diagnostics of one gradient update.
#[derive(Debug, Clone)]
pub struct QTrainDiag {
    /// Mean squared selfish TD error over agents and the batch.
    pub selfish_loss: f64,
    /// Mean squared social TD error, when a social component exists.
    pub social_loss: Option<f64>,
}

/// The complete Q-framework learner for one run.
#[derive(Debug, Clone)]
pub struct QTrainer {
    pub params: QParams,
    pub num_agents: usize,
    pub action_counts: Vec<usize>,
    pub selfish: Vec<AgentQNet>,
    /// Social component; absent for reward-mixing and selfish variants.
    pub social: Option<MixingAssembly>,
    pub buffer: ReplayBuffer,
    pub eps: EpsSchedule,
    action_rngs: Vec<ChaCha8Rng>,
    selfish_rng: ChaCha8Rng,
    social_rng: ChaCha8Rng,
    env_steps: u64,
    train_steps: u64,
    episode: u64,
    step_in_episode: usize,
}

impl QTrainer {
    pub fn new(
        params: QParams,
        action_counts: &[usize],
        obs_width: usize,
        state_width: usize,
        seed: u64,
    ) -> Self {
        params.validate();
        assert!(!action_counts.is_empty(), "need at least one agent");
        assert!(action_counts.iter().all(|&a| a >= 1), "empty action set");
        assert!(obs_width >= 1 && state_width >= 1, "feature widths must be positive");
        let num_agents = action_counts.len();
        let fp = params.fingerprint as usize;
        let selfish: Vec<AgentQNet> = action_counts
            .iter()
            .enumerate()
            .map(|(i, &actions)| {
                let mut widths = vec![obs_width + fp];
                widths.extend_from_slice(&params.hidden);
                widths.push(actions);
                let mut rng = stream_rng(seed, Stream::SelfishInit(i));
                AgentQNet::new(&widths, params.learning_rate, params.lr_decay, &mut rng)
            })
            .collect();
        let social = params.has_social().then(|| {
            let mut rng = stream_rng(seed, Stream::SocialInit);
            MixingAssembly::new(
                obs_width + fp,
                state_width + fp,
                action_counts,
                &params.hidden,
                params.mixing_embed,
                params.hyper_hidden,
                params.learning_rate,
                params.lr_decay,
                &mut rng,
            )
        });
        let buffer = ReplayBuffer::new(params.buffer_capacity, params.n_step, params.prioritization);
        let eps = EpsSchedule::new(params.eps_start, params.eps_decay, params.eps_floor);
        QTrainer {
            num_agents,
            action_counts: action_counts.to_vec(),
            selfish,
            social,
            buffer,
            eps,
            action_rngs: (0..num_agents).map(|i| stream_rng(seed, Stream::Action(i))).collect(),
            selfish_rng: stream_rng(seed, Stream::SelfishUpdate),
            social_rng: stream_rng(seed, Stream::SocialUpdate),
            env_steps: 0,
            train_steps: 0,
            episode: 0,
            step_in_episode: 0,
            params,
        }
    }

    /// Appends the fingerprint feature when enabled.
    fn with_fingerprint(&self, features: &[f64]) -> Vec<f64> {
        let mut v = features.to_vec();
        if self.params.fingerprint {
            v.push(self.eps.eps);
        }
        v
    }

    /// Combined per-action values `(1−λ)·Q_i + λ·Q_i^SW` of one agent on an
    /// already-fingerprinted observation, from the online networks.
    fn combined_online(&self, agent: usize, obs: &[f64]) -> Vec<f64> {
        let (mut values, _) = self.selfish[agent].online.forward(obs, 1);
        let lambda = self.params.lambda;
        if lambda > 0.0 {
            if let Some(social) = &self.social {
                let (contrib, _) = social.contributions[agent].online.forward(obs, 1);
                for (v, c) in values.iter_mut().zip(&contrib) {
                    *v = (1.0 - lambda) * *v + lambda * c;
                }
            }
        }
        values
    }

    /// Combined per-action values on a raw observation (public probe for
    /// tests and evaluation).
    pub fn combined_values(&self, agent: usize, obs: &[f64]) -> Vec<f64> {
        self.combined_online(agent, &self.with_fingerprint(obs))
    }

    /// ε-greedy action. The exploration and tie-break draws happen
    /// unconditionally so the agent's random stream position never depends
    /// on network outputs.
    pub fn select_action(&mut self, agent: usize, obs: &[f64]) -> usize {
        assert!(agent < self.num_agents, "agent index {agent} out of range");
        let explore = self.action_rngs[agent].gen::<f64>() < self.eps.eps;
        let random_action = self.action_rngs[agent].gen_range(0..self.action_counts[agent]);
        if explore {
            random_action
        } else {
            argmax(&self.combined_values(agent, obs))
        }
    }

    /// Greedy action with exploration disabled (evaluation policy).
    pub fn greedy_action(&self, agent: usize, obs: &[f64]) -> usize {
        argmax(&self.combined_values(agent, obs))
    }

    /// Stores one environment transition.
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        obs: &[Vec<f64>],
        state: &[f64],
        actions: &[usize],
        rewards: &[f64],
        next_obs: &[Vec<f64>],
        next_state: &[f64],
        terminated: &[bool],
        done: bool,
    ) {
        assert_eq!(obs.len(), self.num_agents, "one observation per agent");
        assert_eq!(actions.len(), self.num_agents, "one action per agent");
        assert_eq!(rewards.len(), self.num_agents, "one reward per agent");
        let t = StoredTransition {
            obs: obs.iter().map(|o| self.with_fingerprint(o)).collect(),
            state: self.with_fingerprint(state),
            actions: actions.to_vec(),
            rewards: rewards.to_vec(),
            next_obs: next_obs.iter().map(|o| self.with_fingerprint(o)).collect(),
            next_state: self.with_fingerprint(next_state),
            terminated: terminated.to_vec(),
            done,
            episode: self.episode,
            step_in_episode: self.step_in_episode,
        };
        self.buffer.push(t);
        if done {
            self.episode += 1;
            self.step_in_episode = 0;
        } else {
            self.step_in_episode += 1;
        }
    }

    /// Per-step hook: decays ε and trains at the configured cadence.
    pub fn on_env_step(&mut self) -> Option<QTrainDiag> {
        self.env_steps += 1;
        self.eps.step();
        if self.env_steps.is_multiple_of(self.params.train_every as u64) {
            self.train_step()
        } else {
            None
        }
    }

    /// n-step selfish TD targets for every agent along one sampled chain.
    ///
    /// Rewards accumulate until the agent's own termination; the bootstrap
    /// (when the agent survives the whole chain) evaluates the target
    /// network at the action that maximizes the online combined value.
    pub fn selfish_target(&self, chain: &[usize]) -> Vec<f64> {
        assert!(!chain.is_empty(), "empty chain");
        let gamma = self.params.gamma;
        (0..self.num_agents)
            .map(|agent| {
                let mut y = 0.0;
                let mut cut = false;
                for (k, &idx) in chain.iter().enumerate() {
                    let t = self.buffer.get(idx);
                    let r = if self.params.algorithm == QAlgorithm::Crs {
                        crs_reward(agent, &t.rewards, self.params.lambda, self.params.sw)
                    } else {
                        t.rewards[agent]
                    };
                    y += gamma.powi(k as i32) * r;
                    if t.terminated[agent] {
                        cut = true;
                        break;
                    }
                }
                if !cut {
                    let last = self.buffer.get(*chain.last().expect("nonempty"));
                    let best = argmax(&self.combined_online(agent, &last.next_obs[agent]));
                    let (target_q, _) = self.selfish[agent].target.forward(&last.next_obs[agent], 1);
                    y += gamma.powi(chain.len() as i32) * target_q[best];
                }
                y
            })
            .collect()
    }

    /// Social TD target for one sampled chain.
    ///
    /// Short mode: one-step welfare bootstrap through the target mixing
    /// stack at the combined-greedy joint action. Long mode: welfare of the
    /// per-agent selfish targets.
    pub fn social_target(&self, chain: &[usize]) -> f64 {
        let social = self.social.as_ref().expect("social target without a social component");
        match self.params.mode {
            SocialMode::Long => social_welfare(self.params.sw, &self.selfish_target(chain)),
            SocialMode::Short => {
                let t = self.buffer.get(chain[0]);
                let mut y = social_welfare(self.params.sw, &t.rewards);
                if !t.done {
                    let contributions: Vec<f64> = (0..self.num_agents)
                        .map(|agent| {
                            let best = argmax(&self.combined_online(agent, &t.next_obs[agent]));
                            let (q, _) =
                                social.contributions[agent].target.forward(&t.next_obs[agent], 1);
                            q[best]
                        })
                        .collect();
                    y += self.params.gamma * social.mix_target(&contributions, &t.next_state, 1)[0];
                }
                y
            }
        }
    }

    /// One gradient update: selfish networks on their n-step targets, then
    /// the social stack end-to-end on its welfare targets. Returns `None`
    /// (skip) until the buffer holds the warmup amount.
    pub fn train_step(&mut self) -> Option<QTrainDiag> {
        if self.buffer.len() < self.params.min_buffer {
            return None;
        }
        let selfish_loss = self.train_selfish();
        let social_loss = self.params.has_social().then(|| self.train_social());
        self.train_steps += 1;
        if self.train_steps.is_multiple_of(self.params.target_period) {
            for net in &mut self.selfish {
                net.sync();
            }
            if let Some(social) = &mut self.social {
                social.sync_targets();
            }
        }
        Some(QTrainDiag { selfish_loss, social_loss })
    }

    fn train_selfish(&mut self) -> f64 {
        let batch = self.params.selfish_batch;
        let starts = self.buffer.sample_starts(batch, &mut self.selfish_rng);
        let chains: Vec<Vec<usize>> = starts.iter().map(|&s| self.buffer.chain(s)).collect();
        let targets: Vec<Vec<f64>> = chains.iter().map(|c| self.selfish_target(c)).collect();

        let mut total_loss = 0.0;
        let mut priorities = vec![0.0; batch];
        for agent in 0..self.num_agents {
            let obs_w = self.selfish[agent].online.layer_widths[0];
            let mut input = Vec::with_capacity(batch * obs_w);
            for chain in &chains {
                input.extend_from_slice(&self.buffer.get(chain[0]).obs[agent]);
            }
            let (q, cache) = self.selfish[agent].online.forward(&input, batch);
            let actions = self.action_counts[agent];
            let mut output_grad = vec![0.0; batch * actions];
            for (row, chain) in chains.iter().enumerate() {
                let a = self.buffer.get(chain[0]).actions[agent];
                let delta = targets[row][agent] - q[row * actions + a];
                total_loss += delta * delta;
                priorities[row] += delta.abs() / self.num_agents as f64;
                // Mean squared TD error over the batch.
                output_grad[row * actions + a] = -2.0 * delta / batch as f64;
            }
            let grads = self.selfish[agent].online.backward(&cache, &output_grad);
            let net = &mut self.selfish[agent];
            adam_step(&mut net.online, &grads, &mut net.opt);
        }
        if self.params.prioritization.is_some() {
            for (row, &start) in starts.iter().enumerate() {
                self.buffer.update_priority(start, priorities[row]);
            }
        }
        total_loss / (batch * self.num_agents) as f64
    }

    fn train_social(&mut self) -> f64 {
        let batch = self.params.social_batch;
        let starts = self.buffer.sample_starts(batch, &mut self.social_rng);
        let chains: Vec<Vec<usize>> = starts.iter().map(|&s| self.buffer.chain(s)).collect();
        let targets: Vec<f64> = chains.iter().map(|c| self.social_target(c)).collect();

        // Forward all contribution networks on the first transition of each
        // chain and keep the chosen-action values for mixing.
        let social = self.social.as_ref().expect("social training without a social component");
        let mut contrib_caches = Vec::with_capacity(self.num_agents);
        let mut contrib_q = vec![0.0; batch * self.num_agents];
        for agent in 0..self.num_agents {
            let obs_w = social.contributions[agent].online.layer_widths[0];
            let mut input = Vec::with_capacity(batch * obs_w);
            for chain in &chains {
                input.extend_from_slice(&self.buffer.get(chain[0]).obs[agent]);
            }
            let (q, cache) = social.contributions[agent].online.forward(&input, batch);
            let actions = self.action_counts[agent];
            for (row, chain) in chains.iter().enumerate() {
                let a = self.buffer.get(chain[0]).actions[agent];
                contrib_q[row * self.num_agents + agent] = q[row * actions + a];
            }
            contrib_caches.push(cache);
        }
        let state_w = social.hyper.w1.layer_widths[0];
        let mut states = Vec::with_capacity(batch * state_w);
        for chain in &chains {
            states.extend_from_slice(&self.buffer.get(chain[0]).state);
        }
        let (predictions, mix_cache) = social.mix(&contrib_q, &states, batch);

        let mut total_loss = 0.0;
        let mut output_grad = vec![0.0; batch];
        for row in 0..batch {
            let delta = targets[row] - predictions[row];
            total_loss += delta * delta;
            output_grad[row] = -2.0 * delta / batch as f64;
        }
        let (d_contrib, hyper_grads) = social.mix_backward(&mix_cache, &output_grad);

        // Route contribution gradients through each agent's network at the
        // stored action.
        let mut contrib_grads = Vec::with_capacity(self.num_agents);
        for agent in 0..self.num_agents {
            let actions = self.action_counts[agent];
            let mut grad = vec![0.0; batch * actions];
            for (row, chain) in chains.iter().enumerate() {
                let a = self.buffer.get(chain[0]).actions[agent];
                grad[row * actions + a] = d_contrib[row * self.num_agents + agent];
            }
            contrib_grads.push(social.contributions[agent].online.backward(&contrib_caches[agent], &grad));
        }
        let social = self.social.as_mut().expect("social training without a social component");
        for (agent, grads) in contrib_grads.iter().enumerate() {
            let c = &mut social.contributions[agent];
            adam_step(&mut c.online, grads, &mut c.opt);
        }
        social.apply_hyper_grads(&hyper_grads);
        total_loss / batch as f64
    }

    /// Flat dump of every parameter array (online and target), for
    /// checkpointing.
    pub fn parameter_vector(&self) -> Vec<f64> {
        let mut v = Vec::new();
        let push_net = |net: &DenseNetwork, v: &mut Vec<f64>| {
            for w in &net.weights {
                v.extend_from_slice(w);
            }
            for b in &net.biases {
                v.extend_from_slice(b);
            }
        };
        for net in &self.selfish {
            push_net(&net.online, &mut v);
            push_net(&net.target, &mut v);
        }
        if let Some(social) = &self.social {
            for net in &social.contributions {
                push_net(&net.online, &mut v);
                push_net(&net.target, &mut v);
            }
            for h in [&social.hyper, &social.hyper_target] {
                push_net(&h.w1, &mut v);
                push_net(&h.b1, &mut v);
                push_net(&h.w2, &mut v);
                push_net(&h.b2, &mut v);
            }
        }
        v
    }

    /// Restores parameters dumped by [`QTrainer::parameter_vector`].
    /// Panics if the vector does not match this trainer's architecture.
    pub fn load_parameter_vector(&mut self, params: &[f64]) {
        let mut pos = 0;
        let load_net = |net: &mut DenseNetwork, pos: &mut usize| {
            for w in &mut net.weights {
                let len = w.len();
                w.copy_from_slice(&params[*pos..*pos + len]);
                *pos += len;
            }
            for b in &mut net.biases {
                let len = b.len();
                b.copy_from_slice(&params[*pos..*pos + len]);
                *pos += len;
            }
        };
        for net in &mut self.selfish {
            load_net(&mut net.online, &mut pos);
            load_net(&mut net.target, &mut pos);
        }
        if let Some(social) = &mut self.social {
            for net in &mut social.contributions {
                load_net(&mut net.online, &mut pos);
                load_net(&mut net.target, &mut pos);
            }
            for h in [&mut social.hyper, &mut social.hyper_target] {
                load_net(&mut h.w1, &mut pos);
                load_net(&mut h.b1, &mut pos);
                load_net(&mut h.w2, &mut pos);
                load_net(&mut h.b2, &mut pos);
            }
        }
        assert_eq!(pos, params.len(), "checkpoint length does not match the architecture");
    }
}
