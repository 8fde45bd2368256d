//! Reference vs. generated cluster distributions, with crash-safe
//! persistence of the generated counts.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::scoring::scarcity_reward;
use super::SynthesisError;

#[derive(Debug, Clone)]
pub struct DistributionTracker {
    pub reference_counts: Vec<u64>,
    pub generated_counts: Vec<u64>,
    pub epsilon: f64,
}

impl DistributionTracker {
    pub fn new(reference_counts: Vec<u64>, epsilon: f64) -> Self {
        let k = reference_counts.len();
        DistributionTracker {
            reference_counts,
            generated_counts: vec![0; k],
            epsilon,
        }
    }

    pub fn k(&self) -> usize {
        self.reference_counts.len()
    }

    pub fn p_ref(&self, cluster: usize) -> f64 {
        let total: u64 = self.reference_counts.iter().sum();
        if total == 0 {
            0.0
        } else {
            self.reference_counts[cluster] as f64 / total as f64
        }
    }

    pub fn p_gen(&self, cluster: usize) -> f64 {
        let total: u64 = self.generated_counts.iter().sum();
        if total == 0 {
            0.0
        } else {
            self.generated_counts[cluster] as f64 / total as f64
        }
    }

    pub fn total_generated(&self) -> u64 {
        self.generated_counts.iter().sum()
    }

    pub fn scarcity_reward(&self, cluster: usize) -> f64 {
        scarcity_reward(self.p_ref(cluster), self.p_gen(cluster), self.epsilon)
    }

    pub fn record_selection(&mut self, cluster: usize) {
        self.generated_counts[cluster] += 1;
    }

    /// Persist the generated counts as one JSON object
    /// `{cluster_index: count}`, written atomically via rename.
    pub fn persist(&self, path: &Path) -> Result<(), SynthesisError> {
        let map: BTreeMap<String, u64> = self
            .generated_counts
            .iter()
            .enumerate()
            .map(|(c, &n)| (c.to_string(), n))
            .collect();
        let body =
            serde_json::to_string(&map).map_err(|e| SynthesisError::TrackerIo(e.to_string()))?;
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| SynthesisError::TrackerIo(e.to_string()))?;
        }
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, body).map_err(|e| SynthesisError::TrackerIo(e.to_string()))?;
        std::fs::rename(&tmp, path).map_err(|e| SynthesisError::TrackerIo(e.to_string()))
    }

    /// Load generated counts from the cache if present, otherwise zeros.
    pub fn load_or_new(
        path: &Path,
        reference_counts: Vec<u64>,
        epsilon: f64,
    ) -> Result<Self, SynthesisError> {
        let mut tracker = Self::new(reference_counts, epsilon);
        if path.exists() {
            let text = std::fs::read_to_string(path)
                .map_err(|e| SynthesisError::TrackerIo(e.to_string()))?;
            let map: BTreeMap<String, u64> =
                serde_json::from_str(&text).map_err(|e| SynthesisError::TrackerIo(e.to_string()))?;
            for (key, count) in map {
                let cluster: usize = key
                    .parse()
                    .map_err(|_| SynthesisError::TrackerIo(format!("bad cluster key `{key}`")))?;
                if cluster >= tracker.k() {
                    return Err(SynthesisError::TrackerIo(format!(
                        "cluster {cluster} out of range for k={}",
                        tracker.k()
                    )));
                }
                tracker.generated_counts[cluster] = count;
            }
        }
        Ok(tracker)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterCoverage {
    pub cluster: usize,
    pub p_ref: f64,
    pub p_gen: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoverageReport {
    pub per_cluster: Vec<ClusterCoverage>,
    pub l1_distance: f64,
    pub total_generated: u64,
}

impl CoverageReport {
    pub fn to_text(&self) -> String {
        let mut out = String::from("cluster  p_ref     p_gen     |diff|\n");
        for row in &self.per_cluster {
            out.push_str(&format!(
                "{:>7}  {:<8.5}  {:<8.5}  {:.5}\n",
                row.cluster,
                row.p_ref,
                row.p_gen,
                (row.p_ref - row.p_gen).abs()
            ));
        }
        out.push_str(&format!(
            "L1 distance to reference: {:.5} over {} selections\n",
            self.l1_distance, self.total_generated
        ));
        out
    }
}

/// Per-cluster proportions plus the L1 distance between generated and
/// reference distributions.
pub fn coverage_report(tracker: &DistributionTracker) -> Result<CoverageReport, SynthesisError> {
    if tracker.total_generated() == 0 {
        return Err(SynthesisError::NoGenerations);
    }
    let per_cluster: Vec<ClusterCoverage> = (0..tracker.k())
        .map(|c| ClusterCoverage {
            cluster: c,
            p_ref: tracker.p_ref(c),
            p_gen: tracker.p_gen(c),
        })
        .collect();
    let l1_distance = per_cluster
        .iter()
        .map(|row| (row.p_ref - row.p_gen).abs())
        .sum();
    Ok(CoverageReport {
        per_cluster,
        l1_distance,
        total_generated: tracker.total_generated(),
    })
}
