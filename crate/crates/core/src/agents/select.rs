use rand::RngCore;

use crate::linalg::argmax;

/// Thompson selection: draw one parameter sample, score every arm under it
/// and return the best arm (lowest index on ties).
pub fn ts_select<P>(
    num_actions: usize,
    rng: &mut dyn RngCore,
    sample: impl FnOnce(&mut dyn RngCore) -> P,
    score: impl Fn(&P, usize) -> f64,
) -> usize {
    let params = sample(rng);
    let scores: Vec<f64> = (0..num_actions).map(|a| score(&params, a)).collect();
    argmax(&scores)
}

/// `argmax_a μ_a + α σ_a`, lowest index on ties.
pub fn ucb_select(means: &[f64], stds: &[f64], alpha: f64) -> usize {
    assert_eq!(means.len(), stds.len());
    let scores: Vec<f64> = means.iter().zip(stds).map(|(m, s)| m + alpha * s).collect();
    argmax(&scores)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn ucb_cases() {
        assert_eq!(ucb_select(&[0.3, 0.2], &[0.0, 5.0], 0.0), 0);
        assert_eq!(ucb_select(&[0.0, 0.0], &[1.0, 2.0], 1.0), 1);
        assert_eq!(ucb_select(&[1.0, 0.0], &[0.0, 2.0], 0.5), 0);
    }

    #[test]
    fn degenerate_posterior_is_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let means = [0.1, 0.7, 0.3];
        for _ in 0..10 {
            assert_eq!(ts_select(3, &mut rng, |_| means, |m, a| m[a]), 1);
        }
        assert_eq!(ts_select(1, &mut rng, |_| (), |_, _| 0.0), 0);
    }

    #[test]
    fn symmetric_arms_split_evenly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let ones = (0..n)
            .filter(|_| {
                ts_select(
                    2,
                    &mut rng,
                    |r| {
                        let a: f64 = StandardNormal.sample(r);
                        let b: f64 = StandardNormal.sample(r);
                        [a, b]
                    },
                    |w, a| w[a],
                ) == 1
            })
            .count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.05, "{freq}");
    }

    proptest! {
        #[test]
        fn shift_invariant(scores in prop::collection::vec(-10.0f64..10.0, 1..8), c in -100.0f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let n = scores.len();
            let a = ts_select(n, &mut rng, |_| scores.clone(), |s, a| s[a]);
            let b = ts_select(n, &mut rng, |_| scores.clone(), |s, a| s[a] + c);
            // rounding in `s + c` can only merge scores closer than ~1e-13
            let clear_winner = scores.iter().enumerate().all(|(i, &s)| i == a || scores[a] - s > 1e-9);
            if clear_winner {
                prop_assert_eq!(a, b);
            }
        }
    }
}
