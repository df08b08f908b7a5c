use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

/// Softmax over negated ranks: `p_i = exp(-λ r_i) / Σ_j exp(-λ r_j)`.
/// Lower (better) ranks get more mass.
pub fn selection_probabilities(avg_ranks: &BTreeMap<u64, f64>, lambda: f64) -> BTreeMap<u64, f64> {
    assert!(lambda > 0.0, "lambda must be positive");
    // Shifting by the best rank leaves the ratios unchanged and avoids
    // underflow for large ranks.
    let best = avg_ranks.values().copied().fold(f64::INFINITY, f64::min);
    let weights: Vec<(u64, f64)> = avg_ranks
        .iter()
        .map(|(&id, &r)| (id, (-lambda * (r - best)).exp()))
        .collect();
    let total: f64 = weights.iter().map(|w| w.1).sum();
    weights.into_iter().map(|(id, w)| (id, w / total)).collect()
}

const RESAMPLE_LIMIT: usize = 100;

/// Draws `count` parent pairs from `probs`. The second parent is redrawn
/// until it differs from the first; after 100 failed draws the best-ranked
/// other individual is taken instead.
pub fn select_parent_pairs<R: Rng>(
    probs: &BTreeMap<u64, f64>,
    avg_ranks: &BTreeMap<u64, f64>,
    count: usize,
    rng: &mut R,
) -> Vec<(u64, u64)> {
    assert!(probs.len() >= 2, "need at least two individuals to pair");
    let ids: Vec<u64> = probs.keys().copied().collect();
    let dist = WeightedIndex::new(probs.values().copied()).expect("probabilities are positive");
    (0..count)
        .map(|_| {
            let a = ids[dist.sample(rng)];
            let mut b = a;
            for _ in 0..RESAMPLE_LIMIT {
                b = ids[dist.sample(rng)];
                if b != a {
                    break;
                }
            }
            if b == a {
                b = best_other(avg_ranks, a);
            }
            (a, b)
        })
        .collect()
}

fn best_other(avg_ranks: &BTreeMap<u64, f64>, not: u64) -> u64 {
    avg_ranks
        .iter()
        .filter(|(&id, _)| id != not)
        .min_by(|x, y| x.1.total_cmp(y.1).then(x.0.cmp(y.0)))
        .map(|(&id, _)| id)
        .expect("at least two individuals")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ranks(r: &[f64]) -> BTreeMap<u64, f64> {
        r.iter().enumerate().map(|(i, &v)| (i as u64, v)).collect()
    }

    #[test]
    fn three_ranks() {
        let p = selection_probabilities(&ranks(&[1.0, 2.0, 3.0]), 0.5);
        // Direct evaluation without the shift.
        let w: Vec<f64> = [1.0f64, 2.0, 3.0].iter().map(|r| (-0.5 * r).exp()).collect();
        let s: f64 = w.iter().sum();
        for i in 0..3 {
            assert!((p[&(i as u64)] - w[i] / s).abs() < 1e-15);
        }
        assert!((p[&0] - 0.5065).abs() < 1e-4);
        assert!((p[&1] - 0.3072).abs() < 1e-4);
        assert!((p[&2] - 0.1863).abs() < 1e-4);
    }

    #[test]
    fn equal_ranks_are_uniform() {
        let p = selection_probabilities(&ranks(&[2.5; 4]), 0.5);
        assert!(p.values().all(|&v| v == 0.25));
    }

    #[test]
    fn pairs_never_self_mate() {
        let probs = BTreeMap::from([(0, 0.98), (1, 0.01), (2, 0.01)]);
        let avg = ranks(&[1.0, 2.0, 3.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pairs = select_parent_pairs(&probs, &avg, 2000, &mut rng);
        assert_eq!(pairs.len(), 2000);
        assert!(pairs.iter().all(|(a, b)| a != b));
    }

    #[test]
    fn exhausted_resampling_takes_best_other() {
        let probs = BTreeMap::from([(0, 1.0), (1, 0.0), (2, 0.0)]);
        let avg = BTreeMap::from([(0, 1.0), (1, 3.0), (2, 2.0)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_parent_pairs(&probs, &avg, 3, &mut rng), vec![(0, 2); 3]);
    }

    #[test]
    fn first_slot_matches_distribution() {
        let avg = ranks(&[1.0, 2.0, 3.0]);
        let p = selection_probabilities(&avg, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for (a, _) in select_parent_pairs(&p, &avg, n, &mut rng) {
            counts[a as usize] += 1;
        }
        for i in 0..3 {
            let f = counts[i] as f64 / n as f64;
            assert!((f - p[&(i as u64)]).abs() <= 0.01, "{i}: {f}");
        }
    }

    proptest! {
        #[test]
        fn normalized_positive_monotone(r in prop::collection::vec(1.0f64..8.0, 1..12), lambda in 0.05f64..3.0) {
            let avg = ranks(&r);
            let p = selection_probabilities(&avg, lambda);
            let sum: f64 = p.values().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12);
            prop_assert!(p.values().all(|&v| v > 0.0));
            for i in 0..r.len() {
                for j in 0..r.len() {
                    if r[j] - r[i] > 1e-9 {
                        prop_assert!(p[&(i as u64)] > p[&(j as u64)]);
                    }
                }
            }
        }
    }
}
