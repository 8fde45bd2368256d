//! Shared fixtures for the integration suites.

use std::path::{Path, PathBuf};

use modeforge::config::PipelineConfig;
use modeforge::model::{
    write_jsonl, DifficultyLabel, ProblemState, Rollout, RolloutBundle, Verdict,
};

/// One source problem shaped like the rollout stage's output: a question
/// with judged rollouts, the first correct one carrying the verified
/// solution trace.
pub fn source_bundle(
    id: &str,
    dataset: &str,
    label: DifficultyLabel,
    steps: &[&str],
) -> RolloutBundle {
    let verdicts = match label {
        DifficultyLabel::AllCorrect => vec![Verdict::Correct; 3],
        DifficultyLabel::Partial => vec![Verdict::Incorrect, Verdict::Correct, Verdict::Correct],
        DifficultyLabel::AllWrong => vec![Verdict::Incorrect; 3],
    };
    RolloutBundle {
        question_id: id.to_string(),
        state: ProblemState {
            question: format!("Original question {id}: compute the final quantity."),
            answer: format!("answer-{id}"),
            solution_steps: vec![],
            step_index: 0,
        },
        rollouts: verdicts
            .into_iter()
            .enumerate()
            .map(|(i, verdict)| Rollout {
                response: format!("raw response {id}/{i}"),
                parsed_steps: steps.iter().map(|s| format!("{id}: {s}")).collect(),
                parsed_final_answer: format!("answer-{id}"),
                verdict,
            })
            .collect(),
        label,
        source_dataset_id: dataset.to_string(),
        rescue_rollouts: vec![],
    }
}

/// Ten-problem corpus: eight eligible partial sources (two of them from
/// provenance-filtered datasets), one all-correct, one all-wrong.
pub fn fixture_corpus() -> Vec<RolloutBundle> {
    let five = ["recall the setup", "isolate the key term", "derive the intermediate value", "substitute", "evaluate"];
    let four = ["set up equations", "eliminate a variable", "solve the reduced system", "check the solution"];
    let six = ["parse the statement", "model the process", "derive the first invariant", "derive the second invariant", "combine both invariants", "conclude"];
    let mut sources = vec![
        source_bundle("fx-000", "fixture-math", DifficultyLabel::Partial, &five),
        source_bundle("fx-001", "fixture-math", DifficultyLabel::Partial, &four),
        source_bundle("fx-002", "fixture-science", DifficultyLabel::Partial, &six),
        source_bundle("fx-003", "fixture-math", DifficultyLabel::Partial, &five),
        source_bundle("fx-004", "fixture-science", DifficultyLabel::Partial, &four),
        source_bundle("fx-005", "fixture-math", DifficultyLabel::Partial, &six),
        source_bundle("fx-006", "cais__hle", DifficultyLabel::Partial, &five),
        source_bundle("fx-007", "xw27__scibench", DifficultyLabel::Partial, &four),
        source_bundle("fx-008", "fixture-math", DifficultyLabel::AllCorrect, &five),
        source_bundle("fx-009", "fixture-math", DifficultyLabel::AllWrong, &five),
    ];
    sources.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    sources
}

pub fn write_fixture_sources(dir: &Path) -> PathBuf {
    let path = dir.join("sources.jsonl");
    write_jsonl(&path, &fixture_corpus()).unwrap();
    path
}

/// Mock-mode config sized for the fixture corpus.
pub fn fixture_config(data_dir: &Path) -> PipelineConfig {
    let cfg = PipelineConfig {
        mock: true,
        data_dir: data_dir.to_path_buf(),
        seed: 42,
        clusters: 4,
        top_m: 5,
        workers: 2,
        retry_base_ms: 0,
        mock_embedding_dim: 16,
        ..PipelineConfig::default()
    };
    cfg.validate().unwrap();
    cfg
}
