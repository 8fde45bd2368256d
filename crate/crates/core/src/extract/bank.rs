//! Flattens validated chains into the thought-mode bank and the
//! retriever training pairs.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::model::{serialize_query_text, ChainRecord, ThoughtMode};

/// One retriever training pair: the problem state before an absorption
/// step (query side) and the thought mode that step extracted (positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub query_text: String,
    pub positive_id: String,
    pub source_problem_id: String,
}

#[derive(Debug, Clone)]
pub struct BankBuild {
    pub bank: Vec<ThoughtMode>,
    pub pairs: Vec<TrainingPair>,
    pub chains_in: usize,
    pub chains_kept: usize,
    pub duplicate_chains: usize,
    pub mean_chain_len: f64,
}

/// Flatten chains into a bank plus training pairs, one pair per mode.
/// Chains are deduplicated by source problem id, with the seed question
/// text as a fallback key, so resumed runs cannot double-insert.
pub fn build_bank(chains: &[ChainRecord]) -> BankBuild {
    let mut seen_ids: HashSet<&str> = HashSet::new();
    let mut seen_questions: HashSet<&str> = HashSet::new();
    let mut bank = Vec::new();
    let mut pairs = Vec::new();
    let mut chains_kept = 0usize;
    let mut duplicate_chains = 0usize;

    for chain in chains {
        if !seen_ids.insert(&chain.source_problem_id)
            || !seen_questions.insert(&chain.seed.question)
        {
            duplicate_chains += 1;
            continue;
        }
        chains_kept += 1;
        for (i, mode) in chain.modes.iter().enumerate() {
            pairs.push(TrainingPair {
                query_text: serialize_query_text(chain.state_before(i)),
                positive_id: mode.id.clone(),
                source_problem_id: chain.source_problem_id.clone(),
            });
            bank.push(mode.clone());
        }
    }

    let mean_chain_len = if chains_kept == 0 {
        0.0
    } else {
        bank.len() as f64 / chains_kept as f64
    };
    BankBuild {
        bank,
        pairs,
        chains_in: chains.len(),
        chains_kept,
        duplicate_chains,
        mean_chain_len,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ProblemState;

    fn state(q: &str, i: usize) -> ProblemState {
        ProblemState {
            question: q.into(),
            answer: "1".into(),
            solution_steps: vec!["s".into()],
            step_index: i,
        }
    }

    fn chain(id: &str, n: usize) -> ChainRecord {
        ChainRecord {
            source_problem_id: id.into(),
            source_dataset_id: "d".into(),
            seed: state(&format!("{id} q0"), 0),
            modes: (1..=n)
                .map(|i| ThoughtMode {
                    id: format!("{id}#{i}"),
                    s_sum: "sum".into(),
                    s_det: "det".into(),
                    k_gen: vec![],
                    k_spec: vec![],
                    source_problem_id: id.into(),
                    cluster: None,
                })
                .collect(),
            evolved: (1..=n).map(|i| state(&format!("{id} q{i}"), i)).collect(),
        }
    }

    #[test]
    fn one_pair_per_mode_with_preceding_queries() {
        let build = build_bank(&[chain("p", 3)]);
        assert_eq!(build.bank.len(), 3);
        assert_eq!(build.pairs.len(), 3);
        let queries: Vec<&str> = build.pairs.iter().map(|p| p.query_text.as_str()).collect();
        assert_eq!(queries, vec!["p q0", "p q1", "p q2"]);
        assert_eq!(build.pairs[2].positive_id, "p#3");
    }

    #[test]
    fn duplicate_chains_appear_once() {
        let c = chain("p", 2);
        let build = build_bank(&[c.clone(), c]);
        assert_eq!(build.chains_kept, 1);
        assert_eq!(build.duplicate_chains, 1);
        assert_eq!(build.bank.len(), 2);
    }

    #[test]
    fn pair_count_equals_mode_count() {
        let build = build_bank(&[chain("a", 2), chain("b", 4), chain("c", 1)]);
        assert_eq!(build.pairs.len(), build.bank.len());
        assert!((build.mean_chain_len - 7.0 / 3.0).abs() < 1e-12);
    }
}
