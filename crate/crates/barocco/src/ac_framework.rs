//! Actor-critic side of the meta-algorithm: decentralized softmax policies
//! trained with PPO on a convex mixture of two advantages — a selfish one
//! from a centralized critic `V_i(s | a_{−i})` and a social one from a
//! counterfactual critic `Q_i^SW(s, · | a_{−i})` whose baseline marginalizes
//! the agent's own action under its policy.
//!
//! The same trainer covers the full method (social targets from the vector
//! of selfish TD targets), vanilla counterfactual learning (λ = 1 with the
//! one-step welfare bootstrap), reward mixing with independent learners
//! (no social critics), and the selfish baseline (λ = 0).

use crate::numerics::{adam_step, argmax, Activation, AdamState, DenseNetwork, ppo_loss};
use crate::q_framework::SocialMode;
use crate::rng::{stream_rng, Stream};
use crate::welfare::{crs_reward, social_welfare, SWChoice};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Which variant the trainer runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ACAlgorithm {
    /// Both critics; social targets from the selfish TD-target vector.
    Barocco,
    /// Social critic only drives behavior (λ = 1) with the one-step welfare
    /// bootstrap.
    Vanilla,
    /// Independent PPO learners on the mixed reward; no social critics.
    Crs,
    /// Selfish learners (λ = 0).
    Selfish,
}

/// Hyperparameters of the actor-critic trainer.
#[derive(Debug, Clone)]
pub struct ACParams {
    pub algorithm: ACAlgorithm,
    pub lambda: f64,
    pub sw: SWChoice,
    pub mode: SocialMode,
    pub gamma: f64,
    /// Environment steps per rollout batch.
    pub rollout_len: usize,
    pub minibatch: usize,
    pub epochs: usize,
    /// PPO clip range ε.
    pub clip: f64,
    /// Entropy bonus coefficient, annealed linearly from start to end over
    /// `entropy_anneal_steps` environment steps.
    pub entropy_start: f64,
    pub entropy_end: f64,
    pub entropy_anneal_steps: u64,
    /// Hidden widths shared by policies and critics (weights are not).
    pub hidden: Vec<usize>,
    pub policy_lr: f64,
    pub critic_lr: f64,
    /// Multiplicative per-update learning-rate decay (1 = constant).
    pub lr_decay: f64,
}

impl ACParams {
    /// Desk-scale defaults for the given variant.
    pub fn desk(algorithm: ACAlgorithm, lambda: f64, sw: SWChoice) -> Self {
        let mode = match algorithm {
            ACAlgorithm::Vanilla => SocialMode::Short,
            _ => SocialMode::Long,
        };
        ACParams {
            algorithm,
            lambda,
            sw,
            mode,
            gamma: 0.99,
            rollout_len: 256,
            minibatch: 64,
            epochs: 4,
            clip: 0.2,
            entropy_start: 0.05,
            entropy_end: 0.0,
            entropy_anneal_steps: 20_000,
            hidden: vec![64, 64],
            policy_lr: 3e-4,
            critic_lr: 1e-3,
            lr_decay: 1.0,
        }
    }

    fn validate(&self) {
        assert!((0.0..=1.0).contains(&self.lambda), "λ {} outside [0, 1]", self.lambda);
        assert!((0.0..1.0).contains(&self.gamma), "γ {} outside [0, 1)", self.gamma);
        assert!(self.rollout_len >= 1, "rollout length must be positive");
        assert!(
            self.minibatch >= 1 && self.minibatch <= self.rollout_len,
            "mini-batch must fit in the rollout"
        );
        assert!(self.epochs >= 1, "need at least one epoch");
        assert!(self.clip > 0.0, "clip range must be positive");
        assert!(
            self.entropy_start >= self.entropy_end && self.entropy_end >= 0.0,
            "entropy coefficient must anneal downward to a nonnegative value"
        );
        assert!(self.entropy_anneal_steps >= 1, "anneal horizon must be positive");
        match self.algorithm {
            ACAlgorithm::Vanilla => {
                assert_eq!(self.lambda, 1.0, "vanilla counterfactual learning requires λ = 1");
                assert_eq!(self.mode, SocialMode::Short, "vanilla uses the short target");
            }
            ACAlgorithm::Selfish => assert_eq!(self.lambda, 0.0, "selfish baseline requires λ = 0"),
            _ => {}
        }
    }

    /// Whether this variant trains social critics at all.
    pub fn has_social(&self) -> bool {
        matches!(self.algorithm, ACAlgorithm::Barocco | ACAlgorithm::Vanilla)
    }
}

/// One-step TD residual of the centralized selfish critic; the bootstrap is
/// cut when the agent's life ended on this transition.
pub fn selfish_advantage(reward: f64, value: f64, next_value: f64, gamma: f64, terminated: bool) -> f64 {
    let y = reward + if terminated { 0.0 } else { gamma * next_value };
    y - value
}

/// Counterfactual advantage: the taken action's social value minus the
/// policy expectation over the agent's own actions (others' actions fixed).
pub fn coma_advantage(q_values: &[f64], policy: &[f64], action: usize) -> f64 {
    assert_eq!(q_values.len(), policy.len(), "critic/policy action-count mismatch");
    assert!(action < q_values.len(), "action index out of range");
    let baseline: f64 = q_values.iter().zip(policy).map(|(q, p)| q * p).sum();
    q_values[action] - baseline
}

/// Normalizes advantages in place to zero mean and unit variance. A floor
/// on the standard deviation keeps degenerate all-equal batches at zero
/// instead of amplifying rounding noise.
pub fn normalize_advantages(advantages: &mut [f64]) {
    assert!(!advantages.is_empty(), "cannot normalize an empty batch");
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
    let denom = var.sqrt().max(1e-8);
    for a in advantages.iter_mut() {
        *a = (*a - mean) / denom;
    }
}

/// One stored rollout transition, shared by all agents.
#[derive(Debug, Clone)]
pub struct ACTransition {
    pub obs: Vec<Vec<f64>>,
    pub state: Vec<f64>,
    pub actions: Vec<usize>,
    /// Full per-agent action distributions at collection time (π_old).
    pub probs: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub next_obs: Vec<Vec<f64>>,
    pub next_state: Vec<f64>,
    pub terminated: Vec<bool>,
    pub done: bool,
}

/// Diagnostics of one PPO update.
#[derive(Debug, Clone)]
pub struct ACUpdateDiag {
    /// Mean probability ratio over the batch at the start of the first
    /// epoch (exactly 1 when the snapshot is correct).
    pub first_epoch_mean_ratio: f64,
    /// Fraction of samples whose ratio left the clip interval, measured at
    /// the final epoch.
    pub clip_fraction: f64,
    /// Mean policy entropy over agents and batch at the first epoch.
    pub mean_entropy: f64,
    /// Per-component advantage statistics (mean, std) before normalization.
    pub selfish_adv_stats: (f64, f64),
    pub social_adv_stats: Option<(f64, f64)>,
    pub selfish_critic_loss: f64,
    pub social_critic_loss: Option<f64>,
}

/// The complete actor-critic learner for one run.
#[derive(Debug, Clone)]
pub struct ACTrainer {
    pub params: ACParams,
    pub num_agents: usize,
    pub action_counts: Vec<usize>,
    pub state_width: usize,
    pub policies: Vec<DenseNetwork>,
    pub policy_opts: Vec<AdamState>,
    /// Centralized critics V_i(s | a_{−i}).
    pub selfish_critics: Vec<DenseNetwork>,
    pub selfish_opts: Vec<AdamState>,
    /// Counterfactual critics Q_i^SW(s, · | a_{−i}); absent for
    /// reward-mixing and selfish variants.
    pub social_critics: Option<Vec<DenseNetwork>>,
    pub social_opts: Option<Vec<AdamState>>,
    rollout: Vec<ACTransition>,
    action_rngs: Vec<ChaCha8Rng>,
    /// Minibatch shuffling and rollout-end bootstrap action draws.
    update_rng: ChaCha8Rng,
    env_steps: u64,
}

impl ACTrainer {
    pub fn new(
        params: ACParams,
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
        let others_width =
            |i: usize| -> usize { action_counts.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &a)| a).sum() };

        let mut policies = Vec::with_capacity(num_agents);
        let mut selfish_critics = Vec::with_capacity(num_agents);
        let mut social_critics = Vec::with_capacity(num_agents);
        for i in 0..num_agents {
            // One stream per agent's selfish half (policy + critic); the
            // social critics all come from the shared social stream.
            let mut rng = stream_rng(seed, Stream::SelfishInit(i));
            let mut policy_widths = vec![obs_width];
            policy_widths.extend_from_slice(&params.hidden);
            policy_widths.push(action_counts[i]);
            // Small output gain keeps the initial policy near uniform.
            policies.push(DenseNetwork::init_orthogonal(&policy_widths, Activation::Softmax, 0.01, &mut rng));
            let mut critic_widths = vec![state_width + others_width(i)];
            critic_widths.extend_from_slice(&params.hidden);
            critic_widths.push(1);
            selfish_critics.push(DenseNetwork::init_orthogonal(&critic_widths, Activation::Identity, 1.0, &mut rng));
        }
        if params.has_social() {
            let mut rng = stream_rng(seed, Stream::SocialInit);
            for i in 0..num_agents {
                let mut widths = vec![state_width + others_width(i)];
                widths.extend_from_slice(&params.hidden);
                widths.push(action_counts[i]);
                social_critics.push(DenseNetwork::init_orthogonal(&widths, Activation::Identity, 1.0, &mut rng));
            }
        }

        let policy_opts = policies.iter().map(|n| AdamState::new(n, params.policy_lr, params.lr_decay)).collect();
        let selfish_opts =
            selfish_critics.iter().map(|n| AdamState::new(n, params.critic_lr, params.lr_decay)).collect();
        let social_opts = params.has_social().then(|| {
            social_critics.iter().map(|n| AdamState::new(n, params.critic_lr, params.lr_decay)).collect()
        });
        ACTrainer {
            num_agents,
            action_counts: action_counts.to_vec(),
            state_width,
            policies,
            policy_opts,
            selfish_critics,
            selfish_opts,
            social_critics: params.has_social().then_some(social_critics),
            social_opts,
            rollout: Vec::with_capacity(params.rollout_len),
            action_rngs: (0..num_agents).map(|i| stream_rng(seed, Stream::Action(i))).collect(),
            update_rng: stream_rng(seed, Stream::SelfishUpdate),
            env_steps: 0,
            params,
        }
    }

    /// Current action distribution of one agent.
    pub fn action_probs(&self, agent: usize, obs: &[f64]) -> Vec<f64> {
        self.policies[agent].forward(obs, 1).0
    }

    /// Samples an action from the agent's policy; returns the action and
    /// the full distribution it was drawn from (the π_old snapshot to store
    /// with the transition).
    pub fn sample_action(&mut self, agent: usize, obs: &[f64]) -> (usize, Vec<f64>) {
        assert!(agent < self.num_agents, "agent index {agent} out of range");
        let probs = self.action_probs(agent, obs);
        let action = categorical(&probs, &mut self.action_rngs[agent]);
        (action, probs)
    }

    /// Most probable action (evaluation policy).
    pub fn mode_action(&self, agent: usize, obs: &[f64]) -> usize {
        argmax(&self.action_probs(agent, obs))
    }

    /// Current entropy bonus coefficient (linear anneal over env steps).
    pub fn entropy_coefficient(&self) -> f64 {
        let p = &self.params;
        let frac = (self.env_steps as f64 / p.entropy_anneal_steps as f64).min(1.0);
        p.entropy_start + (p.entropy_end - p.entropy_start) * frac
    }

    /// Number of transitions in the current rollout.
    pub fn rollout_len(&self) -> usize {
        self.rollout.len()
    }

    /// Stores one transition; triggers a PPO update when the rollout is
    /// full and returns its diagnostics.
    #[allow(clippy::too_many_arguments)]
    pub fn record(
        &mut self,
        obs: &[Vec<f64>],
        state: &[f64],
        actions: &[usize],
        probs: &[Vec<f64>],
        rewards: &[f64],
        next_obs: &[Vec<f64>],
        next_state: &[f64],
        terminated: &[bool],
        done: bool,
    ) -> Option<ACUpdateDiag> {
        assert_eq!(obs.len(), self.num_agents, "one observation per agent");
        assert_eq!(actions.len(), self.num_agents, "one action per agent");
        assert_eq!(probs.len(), self.num_agents, "one distribution per agent");
        assert_eq!(rewards.len(), self.num_agents, "one reward per agent");
        self.rollout.push(ACTransition {
            obs: obs.to_vec(),
            state: state.to_vec(),
            actions: actions.to_vec(),
            probs: probs.to_vec(),
            rewards: rewards.to_vec(),
            next_obs: next_obs.to_vec(),
            next_state: next_state.to_vec(),
            terminated: terminated.to_vec(),
            done,
        });
        self.env_steps += 1;
        if self.rollout.len() == self.params.rollout_len {
            Some(self.update())
        } else {
            None
        }
    }

    /// Critic input: global state with every other agent's action one-hot
    /// encoded, in agent order.
    fn critic_input(&self, agent: usize, state: &[f64], actions: &[usize]) -> Vec<f64> {
        let mut x = state.to_vec();
        for j in 0..self.num_agents {
            if j == agent {
                continue;
            }
            let mut onehot = vec![0.0; self.action_counts[j]];
            onehot[actions[j]] = 1.0;
            x.extend_from_slice(&onehot);
        }
        x
    }

    /// Joint actions at t+1 for every rollout position: shifted from the
    /// batch where available, freshly sampled from the current policies at
    /// the final position (the rollout may cut an episode mid-flight).
    fn next_joint_actions(&mut self) -> Vec<Vec<usize>> {
        let len = self.rollout.len();
        let mut next_actions: Vec<Vec<usize>> = Vec::with_capacity(len);
        for t in 0..len - 1 {
            next_actions.push(self.rollout[t + 1].actions.clone());
        }
        let last = &self.rollout[len - 1];
        let sampled: Vec<usize> = (0..self.num_agents)
            .map(|i| {
                let probs = self.policies[i].forward(&last.next_obs[i], 1).0;
                categorical(&probs, &mut self.update_rng)
            })
            .collect();
        next_actions.push(sampled);
        next_actions
    }

    /// Runs the PPO update on the collected rollout. Panics if the rollout
    /// is empty.
    pub fn update(&mut self) -> ACUpdateDiag {
        assert!(!self.rollout.is_empty(), "update on an empty rollout");
        let len = self.rollout.len();
        let gamma = self.params.gamma;
        let lambda = self.params.lambda;
        let next_actions = self.next_joint_actions();

        // Per-agent critic inputs at t and t+1.
        let inputs: Vec<Vec<f64>> = (0..self.num_agents)
            .map(|i| {
                let mut x = Vec::new();
                for t in &self.rollout {
                    x.extend_from_slice(&self.critic_input(i, &t.state, &t.actions));
                }
                x
            })
            .collect();
        let next_inputs: Vec<Vec<f64>> = (0..self.num_agents)
            .map(|i| {
                let mut x = Vec::new();
                for (t, na) in self.rollout.iter().zip(&next_actions) {
                    x.extend_from_slice(&self.critic_input(i, &t.next_state, na));
                }
                x
            })
            .collect();

        // Selfish targets and advantages from the pre-update critics.
        let mut selfish_targets = vec![vec![0.0; len]; self.num_agents];
        let mut selfish_adv = vec![vec![0.0; len]; self.num_agents];
        for i in 0..self.num_agents {
            let (v, _) = self.selfish_critics[i].forward(&inputs[i], len);
            let (v_next, _) = self.selfish_critics[i].forward(&next_inputs[i], len);
            for (t, tr) in self.rollout.iter().enumerate() {
                let reward = if self.params.algorithm == ACAlgorithm::Crs {
                    crs_reward(i, &tr.rewards, lambda, self.params.sw)
                } else {
                    tr.rewards[i]
                };
                selfish_targets[i][t] = reward
                    + if tr.terminated[i] { 0.0 } else { gamma * v_next[t] };
                selfish_adv[i][t] = selfish_targets[i][t] - v[t];
            }
        }

        // Social targets and counterfactual advantages.
        let mut social_targets = vec![vec![0.0; len]; self.num_agents];
        let mut social_adv = vec![vec![0.0; len]; self.num_agents];
        if let Some(critics) = &self.social_critics {
            for i in 0..self.num_agents {
                let actions = self.action_counts[i];
                let (q, _) = critics[i].forward(&inputs[i], len);
                let (q_next, _) = critics[i].forward(&next_inputs[i], len);
                for (t, tr) in self.rollout.iter().enumerate() {
                    let row = &q[t * actions..(t + 1) * actions];
                    social_adv[i][t] = coma_advantage(row, &tr.probs[i], tr.actions[i]);
                    social_targets[i][t] = match self.params.mode {
                        SocialMode::Short => {
                            let mut y = social_welfare(self.params.sw, &tr.rewards);
                            if !tr.terminated[i] {
                                y += gamma * q_next[t * actions + next_actions[t][i]];
                            }
                            y
                        }
                        SocialMode::Long => {
                            let y_vec: Vec<f64> =
                                (0..self.num_agents).map(|j| selfish_targets[j][t]).collect();
                            social_welfare(self.params.sw, &y_vec)
                        }
                    };
                }
            }
        }

        // Raw advantage statistics for the diagnostics, then the combined,
        // batch-normalized advantage actually fed to PPO.
        let stats = |xs: &[Vec<f64>]| {
            let n = (xs.len() * len) as f64;
            let mean = xs.iter().flatten().sum::<f64>() / n;
            let var = xs.iter().flatten().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        };
        let selfish_adv_stats = stats(&selfish_adv);
        let social_adv_stats = self.social_critics.is_some().then(|| stats(&social_adv));

        let mut combined_adv = vec![vec![0.0; len]; self.num_agents];
        for i in 0..self.num_agents {
            for t in 0..len {
                combined_adv[i][t] = if lambda == 0.0 || self.social_critics.is_none() {
                    selfish_adv[i][t]
                } else {
                    (1.0 - lambda) * selfish_adv[i][t] + lambda * social_adv[i][t]
                };
            }
            normalize_advantages(&mut combined_adv[i]);
        }

        // Pre-update diagnostics: snapshot ratios are 1 by construction at
        // the first epoch; entropy of the stored distributions.
        let first_epoch_mean_ratio = {
            let mut total = 0.0;
            for tr in &self.rollout {
                for i in 0..self.num_agents {
                    let probs = self.policies[i].forward(&tr.obs[i], 1).0;
                    total += probs[tr.actions[i]] / tr.probs[i][tr.actions[i]];
                }
            }
            total / (len * self.num_agents) as f64
        };
        let mean_entropy = {
            let mut total = 0.0;
            for tr in &self.rollout {
                for probs in &tr.probs {
                    total -= probs.iter().map(|&p| p * p.ln()).sum::<f64>();
                }
            }
            total / (len * self.num_agents) as f64
        };

        // Epoch loop: one shared shuffled partition per epoch.
        let beta = self.entropy_coefficient();
        let mut clip_fraction = 0.0;
        let mut selfish_critic_loss = 0.0;
        let mut social_critic_loss = 0.0;
        for epoch in 0..self.params.epochs {
            let mut order: Vec<usize> = (0..len).collect();
            for k in (1..len).rev() {
                let j = self.update_rng.gen_range(0..=k);
                order.swap(k, j);
            }
            let last_epoch = epoch + 1 == self.params.epochs;
            let mut clipped = 0usize;
            for chunk in order.chunks(self.params.minibatch) {
                clipped += self.minibatch_update(
                    chunk,
                    &combined_adv,
                    &selfish_targets,
                    &social_targets,
                    &inputs,
                    beta,
                    last_epoch,
                    &mut selfish_critic_loss,
                    &mut social_critic_loss,
                );
            }
            if last_epoch {
                clip_fraction = clipped as f64 / (len * self.num_agents) as f64;
            }
        }
        let updates = self.params.epochs;
        self.rollout.clear();
        ACUpdateDiag {
            first_epoch_mean_ratio,
            clip_fraction,
            mean_entropy,
            selfish_adv_stats,
            social_adv_stats,
            selfish_critic_loss: selfish_critic_loss / updates as f64,
            social_critic_loss: self
                .social_critics
                .is_some()
                .then(|| social_critic_loss / updates as f64),
        }
    }

    /// One minibatch step for every agent: PPO policy loss with entropy
    /// bonus, selfish critic regression, social critic regression. Returns
    /// the number of clipped samples (for the final-epoch diagnostic).
    #[allow(clippy::too_many_arguments)]
    fn minibatch_update(
        &mut self,
        chunk: &[usize],
        combined_adv: &[Vec<f64>],
        selfish_targets: &[Vec<f64>],
        social_targets: &[Vec<f64>],
        inputs: &[Vec<f64>],
        beta: f64,
        count_clipped: bool,
        selfish_critic_loss: &mut f64,
        social_critic_loss: &mut f64,
    ) -> usize {
        let m = chunk.len();
        let mut clipped = 0usize;
        for i in 0..self.num_agents {
            let actions = self.action_counts[i];
            let obs_w = self.policies[i].layer_widths[0];

            // Policy step.
            let mut obs_batch = Vec::with_capacity(m * obs_w);
            for &t in chunk {
                obs_batch.extend_from_slice(&self.rollout[t].obs[i]);
            }
            let (probs, cache) = self.policies[i].forward(&obs_batch, m);
            let mut grad = vec![0.0; m * actions];
            for (row, &t) in chunk.iter().enumerate() {
                let tr = &self.rollout[t];
                let a = tr.actions[i];
                let old_p = tr.probs[i][a];
                let ratio = probs[row * actions + a] / old_p;
                let (_, d_ratio) = ppo_loss(ratio, combined_adv[i][t], self.params.clip);
                if count_clipped && (ratio - 1.0).abs() > self.params.clip {
                    clipped += 1;
                }
                grad[row * actions + a] += d_ratio / old_p / m as f64;
                // Entropy bonus −β·H: ∂(−H)/∂p_k = ln p_k + 1.
                if beta > 0.0 {
                    for k in 0..actions {
                        let p = probs[row * actions + k];
                        grad[row * actions + k] += beta * (p.ln() + 1.0) / m as f64;
                    }
                }
            }
            let grads = self.policies[i].backward(&cache, &grad);
            adam_step(&mut self.policies[i], &grads, &mut self.policy_opts[i]);

            // Selfish critic step.
            let in_w = self.selfish_critics[i].layer_widths[0];
            let mut x = Vec::with_capacity(m * in_w);
            for &t in chunk {
                x.extend_from_slice(&inputs[i][t * in_w..(t + 1) * in_w]);
            }
            let (v, cache) = self.selfish_critics[i].forward(&x, m);
            let mut grad = vec![0.0; m];
            for (row, &t) in chunk.iter().enumerate() {
                let delta = selfish_targets[i][t] - v[row];
                *selfish_critic_loss += delta * delta / (m * self.num_agents) as f64;
                grad[row] = -2.0 * delta / m as f64;
            }
            let grads = self.selfish_critics[i].backward(&cache, &grad);
            adam_step(&mut self.selfish_critics[i], &grads, &mut self.selfish_opts[i]);

            // Social critic step (taken-action regression).
            if let (Some(critics), Some(opts)) = (&mut self.social_critics, &mut self.social_opts)
            {
                let (q, cache) = critics[i].forward(&x, m);
                let mut grad = vec![0.0; m * actions];
                for (row, &t) in chunk.iter().enumerate() {
                    let a = self.rollout[t].actions[i];
                    let delta = social_targets[i][t] - q[row * actions + a];
                    *social_critic_loss += delta * delta / (m * self.num_agents) as f64;
                    grad[row * actions + a] = -2.0 * delta / m as f64;
                }
                let grads = critics[i].backward(&cache, &grad);
                adam_step(&mut critics[i], &grads, &mut opts[i]);
            }
        }
        clipped
    }

    /// Flat dump of every parameter array, for checkpointing.
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
        for net in self.policies.iter().chain(&self.selfish_critics) {
            push_net(net, &mut v);
        }
        if let Some(critics) = &self.social_critics {
            for net in critics {
                push_net(net, &mut v);
            }
        }
        v
    }

    /// Restores parameters dumped by [`ACTrainer::parameter_vector`].
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
        for net in self.policies.iter_mut().chain(self.selfish_critics.iter_mut()) {
            load_net(net, &mut pos);
        }
        if let Some(critics) = &mut self.social_critics {
            for net in critics {
                load_net(net, &mut pos);
            }
        }
        assert_eq!(pos, params.len(), "checkpoint length does not match the architecture");
    }
}

/// Draws an index from a categorical distribution. A single uniform draw is
/// consumed regardless of the outcome, so stream positions stay aligned
/// across runs with different probabilities.
fn categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    debug_assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-6, "unnormalized distribution");
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
