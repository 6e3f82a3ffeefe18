//! Social welfare functions, reward mixing, the convex selfish/social
//! combination, and the Gini-based fairness metric.

use serde::{Deserialize, Serialize};

/// Social welfare function applied to a vector of per-agent payoffs.
///
/// Only these two are used: `Sum` measures group efficiency, `Min` measures
/// the worst-off agent and therefore rewards equality.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SWChoice {
    Sum,
    Min,
}

/// Per-agent payoffs (length = agent count, at least 2 in the environments;
/// the functions below accept any nonempty vector).
pub type PayoffVector = Vec<f64>;

/// Evaluates the social welfare of a payoff vector.
///
/// Panics on an empty vector — welfare of nobody is undefined.
pub fn social_welfare(sw: SWChoice, payoffs: &[f64]) -> f64 {
    assert!(!payoffs.is_empty(), "social welfare of an empty payoff vector");
    match sw {
        SWChoice::Sum => payoffs.iter().sum(),
        SWChoice::Min => payoffs.iter().cloned().fold(f64::INFINITY, f64::min),
    }
}

/// Mixed reward for one agent: `(1−λ)·r_i + λ·SW(r)`.
///
/// λ = 0 is fully selfish (the agent's own reward), λ = 1 fully social (the
/// group welfare). Panics if λ lies outside [0, 1] or the index is out of
/// range; configs validate λ before any training starts.
pub fn crs_reward(agent_index: usize, rewards: &[f64], lambda: f64, sw: SWChoice) -> f64 {
    assert!((0.0..=1.0).contains(&lambda), "prosociality coefficient {lambda} outside [0, 1]");
    assert!(agent_index < rewards.len(), "agent index {agent_index} out of range");
    combine(rewards[agent_index], social_welfare(sw, rewards), lambda)
}

/// Convex combination `(1−λ)·selfish + λ·social`; the same mixture is used
/// for rewards, Q-values, and advantages.
pub fn combine(selfish: f64, social: f64, lambda: f64) -> f64 {
    assert!((0.0..=1.0).contains(&lambda), "prosociality coefficient {lambda} outside [0, 1]");
    (1.0 - lambda) * selfish + lambda * social
}

/// Gini index of a nonnegative payoff vector: mean absolute pairwise
/// difference normalized by `2 n² · mean`. Zero means perfect equality.
/// Fairness is reported as `1 − gini`.
///
/// An all-zero vector is defined as perfectly equal (gini 0) to avoid a
/// 0/0 in a symmetric case. Panics on negative entries; callers shift
/// metrics into nonnegative range before measuring fairness.
pub fn gini(payoffs: &[f64]) -> f64 {
    assert!(!payoffs.is_empty(), "gini of an empty payoff vector");
    assert!(
        payoffs.iter().all(|&p| p >= 0.0),
        "gini requires nonnegative payoffs, got {payoffs:?}"
    );
    let n = payoffs.len() as f64;
    let total: f64 = payoffs.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut abs_diff_sum = 0.0;
    for &a in payoffs {
        for &b in payoffs {
            abs_diff_sum += (a - b).abs();
        }
    }
    let mean = total / n;
    abs_diff_sum / (2.0 * n * n * mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn welfare_sum_and_min() {
        assert_eq!(social_welfare(SWChoice::Sum, &[2.0, 3.0]), 5.0);
        assert_eq!(social_welfare(SWChoice::Min, &[2.0, 3.0]), 2.0);
        assert_eq!(social_welfare(SWChoice::Min, &[-1.0, -1.0]), -1.0);
    }

    #[test]
    #[should_panic(expected = "empty payoff vector")]
    fn welfare_rejects_empty_vector() {
        let _ = social_welfare(SWChoice::Sum, &[]);
    }

    #[test]
    fn crs_reward_identity_cases() {
        let r = [2.0, 4.0];
        assert_eq!(crs_reward(0, &r, 0.0, SWChoice::Sum), 2.0);
        assert_eq!(crs_reward(1, &r, 0.0, SWChoice::Sum), 4.0);
        assert_eq!(crs_reward(0, &r, 1.0, SWChoice::Sum), 6.0);
        assert_eq!(crs_reward(1, &r, 1.0, SWChoice::Sum), 6.0);
    }

    #[test]
    fn crs_reward_half_mix() {
        // (1−0.5)·2 + 0.5·(2+4) = 4.
        assert_eq!(crs_reward(0, &[2.0, 4.0], 0.5, SWChoice::Sum), 4.0);
    }

    #[test]
    #[should_panic(expected = "outside [0, 1]")]
    fn crs_reward_rejects_bad_lambda() {
        let _ = crs_reward(0, &[1.0, 2.0], 1.5, SWChoice::Sum);
    }

    #[test]
    fn combine_endpoint_and_midpoint() {
        assert_eq!(combine(1.0, 3.0, 0.0), 1.0);
        assert_eq!(combine(1.0, 3.0, 1.0), 3.0);
        assert_eq!(combine(1.0, 3.0, 0.5), 2.0);
    }

    #[test]
    fn gini_tabulated_cases() {
        assert_eq!(gini(&[1.0, 1.0, 1.0, 1.0, 1.0]), 0.0);
        // [1, 0]: Σ|a−b| = 2, mean = 0.5 → 2 / (2·4·0.5) = 0.5.
        assert_eq!(gini(&[1.0, 0.0]), 0.5);
        assert_eq!(gini(&[0.0, 0.0, 0.0]), 0.0);
    }

    #[test]
    #[should_panic(expected = "nonnegative")]
    fn gini_rejects_negative_entries() {
        let _ = gini(&[1.0, -0.5]);
    }

    proptest! {
        #[test]
        fn combine_stays_between_its_arguments(
            s in -100.0..100.0f64,
            w in -100.0..100.0f64,
            lam in 0.0..=1.0f64,
        ) {
            let c = combine(s, w, lam);
            prop_assert!(c >= s.min(w) - 1e-12);
            prop_assert!(c <= s.max(w) + 1e-12);
        }

        #[test]
        fn combine_is_monotone_in_both_arguments(
            s in -10.0..10.0f64,
            w in -10.0..10.0f64,
            ds in 0.0..5.0f64,
            dw in 0.0..5.0f64,
            lam in 0.0..=1.0f64,
        ) {
            let base = combine(s, w, lam);
            prop_assert!(combine(s + ds, w, lam) >= base - 1e-12);
            prop_assert!(combine(s, w + dw, lam) >= base - 1e-12);
        }

        #[test]
        fn welfare_is_permutation_invariant(
            mut v in proptest::collection::vec(-50.0..50.0f64, 2..6),
        ) {
            let sum0 = social_welfare(SWChoice::Sum, &v);
            let min0 = social_welfare(SWChoice::Min, &v);
            v.reverse();
            prop_assert!((social_welfare(SWChoice::Sum, &v) - sum0).abs() < 1e-12);
            prop_assert!(social_welfare(SWChoice::Min, &v) == min0);
        }

        #[test]
        fn welfare_sum_is_additive(
            a in proptest::collection::vec(-50.0..50.0f64, 3),
            b in proptest::collection::vec(-50.0..50.0f64, 3),
        ) {
            let joint: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            let lhs = social_welfare(SWChoice::Sum, &joint);
            let rhs = social_welfare(SWChoice::Sum, &a) + social_welfare(SWChoice::Sum, &b);
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn welfare_min_is_concave_under_mixtures(
            a in proptest::collection::vec(-50.0..50.0f64, 3),
            b in proptest::collection::vec(-50.0..50.0f64, 3),
            t in 0.0..=1.0f64,
        ) {
            // min(t·a + (1−t)·b) ≥ t·min(a) + (1−t)·min(b)
            let mix: Vec<f64> = a.iter().zip(&b).map(|(x, y)| t * x + (1.0 - t) * y).collect();
            let lhs = social_welfare(SWChoice::Min, &mix);
            let rhs = t * social_welfare(SWChoice::Min, &a) + (1.0 - t) * social_welfare(SWChoice::Min, &b);
            prop_assert!(lhs >= rhs - 1e-9);
        }

        #[test]
        fn crs_full_lambda_sum_is_common_reward(
            r in proptest::collection::vec(-20.0..20.0f64, 2..5),
        ) {
            let sw = social_welfare(SWChoice::Sum, &r);
            for i in 0..r.len() {
                prop_assert!((crs_reward(i, &r, 1.0, SWChoice::Sum) - sw).abs() < 1e-12);
            }
        }

        #[test]
        fn gini_range_and_scale_invariance(
            v in proptest::collection::vec(0.0..100.0f64, 2..6),
            c in 0.1..10.0f64,
        ) {
            let g = gini(&v);
            prop_assert!((0.0..1.0).contains(&g), "gini {g} outside [0, 1)");
            let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
            prop_assert!((gini(&scaled) - g).abs() < 1e-9, "gini not scale invariant");
        }

        #[test]
        fn gini_zero_iff_all_equal(
            x in 0.1..100.0f64,
            n in 2usize..6,
        ) {
            let v = vec![x; n];
            prop_assert!(gini(&v) == 0.0);
            let mut w = v.clone();
            w[0] += x; // introduce inequality
            prop_assert!(gini(&w) > 0.0);
        }

        #[test]
        fn argmax_of_combined_at_lambda_zero_is_selfish_argmax(
            q in proptest::collection::vec(-10.0..10.0f64, 2..7),
            qsw in proptest::collection::vec(-10.0..10.0f64, 2..7),
        ) {
            let n = q.len().min(qsw.len());
            let argmax = |v: &[f64]| {
                let mut best = 0;
                for i in 1..v.len() {
                    if v[i] > v[best] {
                        best = i;
                    }
                }
                best
            };
            let combined: Vec<f64> =
                (0..n).map(|a| combine(q[a], qsw[a], 0.0)).collect();
            prop_assert_eq!(argmax(&combined), argmax(&q[..n]));
        }
    }
}
