//! Provenance-based contamination filtering.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::model::RolloutBundle;

/// Source dataset ids whose descendants must not reach SFT conversion.
#[derive(Debug, Clone, Default)]
pub struct ProvenanceFilter {
    pub filtered_source_ids: BTreeSet<String>,
}

impl ProvenanceFilter {
    pub fn new<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        ProvenanceFilter {
            filtered_source_ids: ids.into_iter().map(Into::into).collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemovalReport {
    pub input_count: usize,
    pub retained_count: usize,
    pub removed_per_source: BTreeMap<String, usize>,
    /// Bundles dropped because they carried no source id at all.
    /// Contamination risk outweighs yield, so these fail closed.
    pub missing_provenance: usize,
    pub retention_rate: f64,
}

impl RemovalReport {
    pub fn removed_count(&self) -> usize {
        self.input_count - self.retained_count
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("input bundles:    {}\n", self.input_count));
        out.push_str(&format!("retained bundles: {}\n", self.retained_count));
        for (source, count) in &self.removed_per_source {
            out.push_str(&format!("removed [{source}]: {count}\n"));
        }
        if self.missing_provenance > 0 {
            out.push_str(&format!(
                "removed [missing provenance]: {}\n",
                self.missing_provenance
            ));
        }
        out.push_str(&format!("retention rate: {:.1}%\n", self.retention_rate * 100.0));
        out
    }
}

#[derive(Debug)]
pub struct FilterOutput {
    pub retained: Vec<RolloutBundle>,
    pub report: RemovalReport,
}

/// Drop bundles whose source dataset id is in the filter set, plus any
/// bundle missing provenance entirely.
pub fn filter_provenance(bundles: Vec<RolloutBundle>, filter: &ProvenanceFilter) -> FilterOutput {
    let input_count = bundles.len();
    let mut retained = Vec::with_capacity(bundles.len());
    let mut removed_per_source: BTreeMap<String, usize> = BTreeMap::new();
    let mut missing_provenance = 0usize;
    for bundle in bundles {
        if bundle.source_dataset_id.trim().is_empty() {
            missing_provenance += 1;
            continue;
        }
        if filter.filtered_source_ids.contains(&bundle.source_dataset_id) {
            *removed_per_source
                .entry(bundle.source_dataset_id.clone())
                .or_insert(0) += 1;
            continue;
        }
        retained.push(bundle);
    }
    let retention_rate = if input_count == 0 {
        1.0
    } else {
        retained.len() as f64 / input_count as f64
    };
    FilterOutput {
        report: RemovalReport {
            input_count,
            retained_count: retained.len(),
            removed_per_source,
            missing_provenance,
            retention_rate,
        },
        retained,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DifficultyLabel, ProblemState, Rollout, Verdict};

    pub(crate) fn bundle(id: &str, source: &str, label: DifficultyLabel) -> RolloutBundle {
        let verdicts = match label {
            DifficultyLabel::AllCorrect => vec![Verdict::Correct; 3],
            DifficultyLabel::Partial => {
                vec![Verdict::Incorrect, Verdict::Correct, Verdict::Correct]
            }
            DifficultyLabel::AllWrong => vec![Verdict::Incorrect; 3],
        };
        RolloutBundle {
            question_id: id.into(),
            state: ProblemState {
                question: format!("question {id}"),
                answer: "a".into(),
                solution_steps: vec!["s".into()],
                step_index: 0,
            },
            rollouts: verdicts
                .into_iter()
                .enumerate()
                .map(|(i, v)| Rollout {
                    response: format!("response {id}/{i}"),
                    parsed_steps: vec!["s".into()],
                    parsed_final_answer: "a".into(),
                    verdict: v,
                })
                .collect(),
            label,
            source_dataset_id: source.into(),
            rescue_rollouts: vec![],
        }
    }

    #[test]
    fn filtered_sources_are_removed() {
        let filter = ProvenanceFilter::new(["cais__hle"]);
        let out = filter_provenance(
            vec![
                bundle("a", "cais__hle", DifficultyLabel::Partial),
                bundle("b", "clean", DifficultyLabel::Partial),
            ],
            &filter,
        );
        assert_eq!(out.retained.len(), 1);
        assert_eq!(out.retained[0].question_id, "b");
        assert_eq!(out.report.removed_per_source["cais__hle"], 1);
    }

    #[test]
    fn missing_provenance_fails_closed() {
        let filter = ProvenanceFilter::new(["x"]);
        let out = filter_provenance(
            vec![bundle("a", "", DifficultyLabel::Partial)],
            &filter,
        );
        assert!(out.retained.is_empty());
        assert_eq!(out.report.missing_provenance, 1);
    }

    #[test]
    fn counts_are_conserved() {
        let filter = ProvenanceFilter::new(["f1", "f2"]);
        let bundles: Vec<RolloutBundle> = (0..20)
            .map(|i| {
                let source = match i % 4 {
                    0 => "f1",
                    1 => "f2",
                    _ => "keep",
                };
                bundle(&format!("q{i}"), source, DifficultyLabel::Partial)
            })
            .collect();
        let out = filter_provenance(bundles, &filter);
        let removed: usize = out.report.removed_per_source.values().sum();
        assert_eq!(
            out.report.retained_count + removed + out.report.missing_provenance,
            out.report.input_count
        );
        // Exhaustive scan: nothing filtered survives.
        assert!(out
            .retained
            .iter()
            .all(|b| !filter.filtered_source_ids.contains(&b.source_dataset_id)));
    }

    #[test]
    fn proportional_fixture_reproduces_known_retention() {
        // 1000 bundles, 51 from filtered sources: 94.9% retained.
        let filter =
            ProvenanceFilter::new(["opencompass__AIME2025", "xw27__scibench", "cais__hle"]);
        let mut bundles = Vec::new();
        for i in 0..949 {
            bundles.push(bundle(&format!("k{i}"), "clean", DifficultyLabel::Partial));
        }
        for (i, source) in ["opencompass__AIME2025", "xw27__scibench", "cais__hle"]
            .iter()
            .cycle()
            .take(51)
            .enumerate()
        {
            bundles.push(bundle(&format!("f{i}"), source, DifficultyLabel::Partial));
        }
        let out = filter_provenance(bundles, &filter);
        assert_eq!(out.report.retained_count, 949);
        assert!((out.report.retention_rate - 0.949).abs() < 1e-12);
        let recomputed =
            out.report.retained_count as f64 / out.report.input_count as f64;
        assert_eq!(recomputed, out.report.retention_rate);
    }
}
