//! Lloyd's algorithm with k-means++ seeding, deterministic under a fixed
//! seed, with empty clusters re-seeded from the farthest point.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthesisError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k: usize,
    pub centroids: Vec<Vec<f64>>,
    /// mode_id → cluster index. BTreeMap keeps serialization stable.
    pub assignment: BTreeMap<String, usize>,
}

impl ClusterModel {
    pub fn cluster_of(&self, mode_id: &str) -> Option<usize> {
        self.assignment.get(mode_id).copied()
    }

    /// Per-cluster mode counts from the bank assignment (the reference
    /// distribution's numerator).
    pub fn reference_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.k];
        for &c in self.assignment.values() {
            counts[c] += 1;
        }
        counts
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), SynthesisError> {
        let body = serde_json::to_string(self).map_err(|e| SynthesisError::TrackerIo(e.to_string()))?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| SynthesisError::TrackerIo(e.to_string()))?;
        }
        std::fs::write(path, body).map_err(|e| SynthesisError::TrackerIo(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SynthesisError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| SynthesisError::TrackerIo(e.to_string()))?;
        serde_json::from_str(&text).map_err(|e| SynthesisError::TrackerIo(e.to_string()))
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        let d = sq_dist(point, centroid);
        if d < best_dist {
            best_dist = d;
            best = c;
        }
    }
    (best, best_dist)
}

fn seed_plus_plus(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    while centroids.len() < k {
        let weights: Vec<f64> = points.iter().map(|p| nearest(p, &centroids).1).collect();
        let total: f64 = weights.iter().sum();
        let next = if total <= f64::EPSILON {
            rng.gen_range(0..points.len())
        } else {
            let mut target = rng.gen_range(0.0..total);
            let mut chosen = points.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[next].clone());
    }
    centroids
}

/// Cluster `(mode_id, vector)` items into `k` groups. Runs at most 100
/// Lloyd iterations, stopping when assignments are stable.
pub fn fit_kmeans(
    items: &[(String, Vec<f64>)],
    k: usize,
    seed: u64,
) -> Result<ClusterModel, SynthesisError> {
    if items.len() < k || k == 0 {
        return Err(SynthesisError::TooFewPoints {
            k,
            points: items.len(),
        });
    }
    let points: Vec<&Vec<f64>> = items.iter().map(|(_, v)| v).collect();
    let owned: Vec<Vec<f64>> = points.iter().map(|p| (*p).clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_plus_plus(&owned, k, &mut rng);
    let mut assignment: Vec<usize> = vec![0; points.len()];

    for _ in 0..100 {
        let mut changed = false;
        for (i, point) in points.iter().enumerate() {
            let (best, _) = nearest(point, &centroids);
            if assignment[i] != best {
                assignment[i] = best;
                changed = true;
            }
        }

        let dim = centroids[0].len();
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (i, point) in points.iter().enumerate() {
            counts[assignment[i]] += 1;
            for (d, x) in point.iter().enumerate() {
                sums[assignment[i]][d] += x;
            }
        }
        for c in 0..k {
            if counts[c] == 0 {
                // Re-seed from the farthest point (lowest index on ties).
                let mut far_idx = 0;
                let mut far_dist = -1.0;
                for (i, point) in points.iter().enumerate() {
                    let d = sq_dist(point, &centroids[assignment[i]]);
                    if d > far_dist {
                        far_dist = d;
                        far_idx = i;
                    }
                }
                centroids[c] = points[far_idx].clone();
                changed = true;
            } else {
                for d in 0..dim {
                    centroids[c][d] = sums[c][d] / counts[c] as f64;
                }
            }
        }
        if !changed {
            break;
        }
    }

    // Final assignment against the settled centroids.
    for (i, point) in points.iter().enumerate() {
        assignment[i] = nearest(point, &centroids).0;
    }
    let assignment_map: BTreeMap<String, usize> = items
        .iter()
        .enumerate()
        .map(|(i, (id, _))| (id.clone(), assignment[i]))
        .collect();
    Ok(ClusterModel {
        k,
        centroids,
        assignment: assignment_map,
    })
}
