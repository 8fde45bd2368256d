//! Stage-count reporting across the pipeline's artifact files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::RolloutError;
use crate::model::{read_jsonl, DifficultyLabel, RolloutBundle};

/// The artifact files the report draws from.
#[derive(Debug, Clone)]
pub struct StagePaths {
    pub sources: PathBuf,
    pub chains: PathBuf,
    pub generated: PathBuf,
    pub rollouts: PathBuf,
    pub filtered: PathBuf,
    pub sft: PathBuf,
    pub hard: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageCounts {
    pub sources: usize,
    pub chains: usize,
    pub generated: usize,
    pub rollouts: usize,
    pub filtered: usize,
    pub sft: usize,
    pub hard: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceShare {
    pub source: String,
    pub count: usize,
    pub percent: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageReport {
    pub counts: StageCounts,
    /// Composition of SFT-eligible bundles by seed source.
    pub composition: Vec<SourceShare>,
}

impl StageReport {
    pub fn to_text(&self) -> String {
        let c = &self.counts;
        let mut out = String::from("stage counts:\n");
        out.push_str(&format!("  source problems:     {}\n", c.sources));
        out.push_str(&format!("  extracted chains:    {}\n", c.chains));
        out.push_str(&format!("  generated records:   {}\n", c.generated));
        out.push_str(&format!("  rollout bundles:     {}\n", c.rollouts));
        out.push_str(&format!("  provenance-filtered: {}\n", c.filtered));
        out.push_str(&format!("  sft records:         {}\n", c.sft));
        out.push_str(&format!("  hard items:          {}\n", c.hard));
        out.push_str("per-source composition of sft-eligible bundles:\n");
        for share in &self.composition {
            out.push_str(&format!(
                "  {:<24} {:>6}  {:>5.1}%\n",
                share.source, share.count, share.percent
            ));
        }
        out
    }
}

fn count_lines(path: &Path, stage: &str) -> Result<usize, RolloutError> {
    if !path.exists() {
        return Err(RolloutError::MissingStageFile(format!(
            "{stage} ({})",
            path.display()
        )));
    }
    let text = std::fs::read_to_string(path).map_err(|e| {
        RolloutError::MissingStageFile(format!("{stage} ({}): {e}", path.display()))
    })?;
    Ok(text.lines().filter(|l| !l.trim().is_empty()).count())
}

/// Count records at every stage and break the SFT-eligible bundles down
/// by seed source.
pub fn pipeline_stats(paths: &StagePaths) -> Result<StageReport, RolloutError> {
    let counts = StageCounts {
        sources: count_lines(&paths.sources, "sources")?,
        chains: count_lines(&paths.chains, "chains")?,
        generated: count_lines(&paths.generated, "generated")?,
        rollouts: count_lines(&paths.rollouts, "rollouts")?,
        filtered: count_lines(&paths.filtered, "filtered")?,
        sft: count_lines(&paths.sft, "sft")?,
        hard: count_lines(&paths.hard, "hard")?,
    };

    let filtered: Vec<RolloutBundle> = read_jsonl(&paths.filtered)?;
    let mut per_source: BTreeMap<String, usize> = BTreeMap::new();
    let mut eligible_total = 0usize;
    for bundle in &filtered {
        if bundle.label != DifficultyLabel::AllWrong {
            *per_source.entry(bundle.source_dataset_id.clone()).or_insert(0) += 1;
            eligible_total += 1;
        }
    }
    let composition: Vec<SourceShare> = per_source
        .into_iter()
        .map(|(source, count)| SourceShare {
            source,
            count,
            percent: if eligible_total == 0 {
                0.0
            } else {
                100.0 * count as f64 / eligible_total as f64
            },
        })
        .collect();

    Ok(StageReport { counts, composition })
}
