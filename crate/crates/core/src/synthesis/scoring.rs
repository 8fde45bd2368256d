//! Candidate scoring and temperature sampling for the selector.

use rand::Rng;

/// Bounded scarcity reward: tanh(ln(1 + (p_ref + eps) / (p_gen + eps))).
///
/// Strictly inside (0, 1) for finite inputs, and strictly decreasing in
/// `p_gen` for fixed `p_ref`: underrepresented clusters score higher.
pub fn scarcity_reward(p_ref: f64, p_gen: f64, epsilon: f64) -> f64 {
    (1.0 + (p_ref + epsilon) / (p_gen + epsilon)).ln().tanh()
}

/// Combined selection score: alpha·similarity + (1-alpha)·scarcity.
pub fn score_candidate(state_sim: f64, scarcity: f64, alpha: f64) -> f64 {
    alpha * state_sim + (1.0 - alpha) * scarcity
}

/// Softmax with temperature, computed with max subtraction.
pub fn softmax_probabilities(scores: &[f64], tau: f64) -> Vec<f64> {
    if scores.is_empty() {
        return Vec::new();
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| ((s - max) / tau).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Sample an index with probability proportional to exp(score/tau).
pub fn sample_candidate(scores: &[f64], tau: f64, rng: &mut impl Rng) -> usize {
    let probs = softmax_probabilities(scores, tau);
    let draw: f64 = rng.gen_range(0.0..1.0);
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if draw < acc {
            return i;
        }
    }
    probs.len() - 1
}
