//! Margin ranking loss over bilinear similarity, with its analytic
//! gradient through the shared adapter matrix.

use super::dot;

/// Hinge loss summed over the negatives of one pair:
/// sum_j max(0, sim_neg_j - sim_pos + margin).
pub fn margin_loss(sim_pos: f64, sim_negs: &[f64], margin: f64) -> f64 {
    sim_negs
        .iter()
        .map(|&sim_neg| (sim_neg - sim_pos + margin).max(0.0))
        .sum()
}

/// One training pair in base-embedding space.
pub struct PairSample<'a> {
    pub query: &'a [f64],
    pub positive: &'a [f64],
    pub negatives: Vec<&'a [f64]>,
}

/// Batch loss and gradient with respect to the adapter matrix.
///
/// With sim(a, b) = (Wa)·(Wb), each active hinge term contributes
/// W((n-p)qᵀ + q(n-p)ᵀ). The loss is summed per pair over its negatives
/// and averaged over the batch.
pub fn loss_and_grad(
    matrix: &[f64],
    dim: usize,
    batch: &[PairSample<'_>],
    margin: f64,
) -> (f64, Vec<f64>) {
    debug_assert_eq!(matrix.len(), dim * dim);
    let apply = |base: &[f64]| -> Vec<f64> {
        (0..dim)
            .map(|r| dot(&matrix[r * dim..(r + 1) * dim], base))
            .collect()
    };

    let mut loss = 0.0;
    // Accumulated outer products in base space; grad = W · accum / |batch|.
    let mut accum = vec![0.0; dim * dim];
    for sample in batch {
        let wq = apply(sample.query);
        let wp = apply(sample.positive);
        let sim_pos = dot(&wq, &wp);
        for negative in &sample.negatives {
            let sim_neg = dot(&wq, &apply(negative));
            let slack = sim_neg - sim_pos + margin;
            if slack > 0.0 {
                loss += slack;
                for r in 0..dim {
                    let diff_r = negative[r] - sample.positive[r];
                    let q_r = sample.query[r];
                    for c in 0..dim {
                        accum[r * dim + c] +=
                            diff_r * sample.query[c] + q_r * (negative[c] - sample.positive[c]);
                    }
                }
            }
        }
    }

    let scale = 1.0 / batch.len().max(1) as f64;
    let mut grad = vec![0.0; dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            let mut sum = 0.0;
            for k in 0..dim {
                sum += matrix[r * dim + k] * accum[k * dim + c];
            }
            grad[r * dim + c] = sum * scale;
        }
    }
    (loss * scale, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inactive_hinge_is_zero() {
        assert_eq!(margin_loss(0.9, &[0.5], 0.2), 0.0);
    }

    #[test]
    fn single_active_hinge_value() {
        let loss = margin_loss(0.55, &[0.6], 0.2);
        assert!((loss - 0.25).abs() < 1e-15);
    }

    #[test]
    fn hinge_sums_over_negatives() {
        let loss = margin_loss(0.55, &[0.6, 0.5], 0.2);
        assert!((loss - 0.40).abs() < 1e-15);
    }

    proptest! {
        // Zero exactly when every negative clears the margin.
        #[test]
        fn zero_at_margin_iff(
            sim_pos in -1.0f64..1.0,
            sim_negs in prop::collection::vec(-1.0f64..1.0, 1..8),
            margin in 0.01f64..0.5,
        ) {
            let loss = margin_loss(sim_pos, &sim_negs, margin);
            prop_assert!(loss >= 0.0);
            let all_clear = sim_negs.iter().all(|&n| n <= sim_pos - margin);
            prop_assert_eq!(loss == 0.0, all_clear);
        }
    }

    fn random_instance(
        rng: &mut ChaCha8Rng,
        dim: usize,
        negatives: usize,
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
        let vector = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let matrix: Vec<f64> = (0..dim * dim).map(|_| rng.gen_range(-0.6..0.6)).collect();
        let query = vector(rng);
        let positive = vector(rng);
        let negs: Vec<Vec<f64>> = (0..negatives).map(|_| vector(rng)).collect();
        (matrix, query, positive, negs)
    }

    fn batch_loss(matrix: &[f64], dim: usize, q: &[f64], p: &[f64], negs: &[Vec<f64>]) -> f64 {
        let sample = PairSample {
            query: q,
            positive: p,
            negatives: negs.iter().map(|n| n.as_slice()).collect(),
        };
        loss_and_grad(matrix, dim, &[sample], 0.2).0
    }

    /// Hinge slacks at this matrix, to exclude kink-adjacent instances.
    fn min_abs_slack(matrix: &[f64], dim: usize, q: &[f64], p: &[f64], negs: &[Vec<f64>]) -> f64 {
        let apply = |base: &[f64]| -> Vec<f64> {
            (0..dim)
                .map(|r| {
                    matrix[r * dim..(r + 1) * dim]
                        .iter()
                        .zip(base)
                        .map(|(w, x)| w * x)
                        .sum()
                })
                .collect()
        };
        let wq = apply(q);
        let sim_pos: f64 = apply(p).iter().zip(&wq).map(|(a, b)| a * b).sum();
        negs.iter()
            .map(|n| {
                let sim_neg: f64 = apply(n).iter().zip(&wq).map(|(a, b)| a * b).sum();
                (sim_neg - sim_pos + 0.2).abs()
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn gradient_matches_central_finite_differences() {
        let dim = 8;
        let step = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 20 {
            let (matrix, query, positive, negs) = random_instance(&mut rng, dim, 3);
            if min_abs_slack(&matrix, dim, &query, &positive, &negs) <= 1e-3 {
                continue;
            }
            let sample = PairSample {
                query: &query,
                positive: &positive,
                negatives: negs.iter().map(|n| n.as_slice()).collect(),
            };
            let (_, grad) = loss_and_grad(&matrix, dim, &[sample], 0.2);
            let mut max_rel = 0.0f64;
            for idx in 0..dim * dim {
                let mut plus = matrix.clone();
                plus[idx] += step;
                let mut minus = matrix.clone();
                minus[idx] -= step;
                let fd = (batch_loss(&plus, dim, &query, &positive, &negs)
                    - batch_loss(&minus, dim, &query, &positive, &negs))
                    / (2.0 * step);
                let denom = grad[idx].abs().max(fd.abs()).max(1e-8);
                max_rel = max_rel.max((grad[idx] - fd).abs() / denom);
            }
            assert!(max_rel < 1e-4, "relative error {max_rel}");
            checked += 1;
        }
    }
}
