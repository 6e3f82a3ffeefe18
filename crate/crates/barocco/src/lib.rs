//! Balancing selfish and social incentives in mixed cooperative-competitive
//! multi-agent reinforcement learning.
//!
//! The crate implements one meta-algorithm in two frameworks plus the
//! baselines it is measured against:
//!
//! * [`q_framework`] — per-agent selfish Q-networks trained independently,
//!   combined at action-selection time with a QMIX-style monotonic social
//!   component via a convex mixture controlled by the prosociality
//!   coefficient λ.
//! * [`ac_framework`] — decentralized softmax policies trained with PPO on a
//!   convex mixture of a centralized selfish advantage and a COMA-style
//!   counterfactual social advantage.
//! * [`tabular`] — tabular Q-learning and exact dynamic-programming oracles
//!   used to validate the value identities on small games.
//!
//! Supporting modules: [`numerics`] (a minimal dense-network engine with
//! explicit forward/backward passes), [`welfare`] (social welfare functions
//! and fairness metrics), [`envs`] (seeded Markov-game simulators), and
//! [`harness`] (experiment orchestration, configuration, and the
//! verification suite).
//!
//! Everything is double-precision, single-threaded, and deterministic per
//! seed: two runs with the same configuration produce byte-identical metric
//! logs.

// The numeric kernels walk several parallel arrays per loop (values, grads,
// targets, masks); explicit indices keep that arithmetic legible where
// iterator zips would bury it.
#![allow(clippy::needless_range_loop)]

pub mod ac_framework;
pub mod envs;
pub mod harness;
pub mod numerics;
pub mod q_framework;
pub mod rng;
pub mod tabular;
pub mod welfare;
