//! Conversion of judged bundles into SFT conversations and the hard-item
//! export.

use super::prompts::{render_inference_user, INFERENCE_SYSTEM_PROMPT};
use crate::model::{DifficultyLabel, RolloutBundle, SftRecord, SFT_SYSTEM_TEXT};

#[derive(Debug)]
pub struct ConvertOutput {
    pub records: Vec<SftRecord>,
    pub eligible: usize,
    pub ineligible: usize,
}

/// One SFT record per bundle with a judged-correct target. The assistant
/// text is the first judged-correct rollout response, byte for byte; the
/// user text embeds the inference prompt ahead of the question. All-wrong
/// bundles are excluded: they lack a verified target.
pub fn convert_sft(bundles: &[RolloutBundle]) -> ConvertOutput {
    let mut records = Vec::new();
    let mut ineligible = 0usize;
    for bundle in bundles {
        if bundle.label == DifficultyLabel::AllWrong {
            ineligible += 1;
            continue;
        }
        let Some(correct) = bundle.first_correct_rollout() else {
            ineligible += 1;
            continue;
        };
        records.push(SftRecord {
            system_text: SFT_SYSTEM_TEXT.to_string(),
            user_text: format!(
                "{}\n{}",
                INFERENCE_SYSTEM_PROMPT,
                render_inference_user(&bundle.state.question)
            ),
            assistant_text: correct.response.clone(),
        });
    }
    ConvertOutput {
        eligible: records.len(),
        ineligible,
        records,
    }
}

/// Bundles labeled partial or all-wrong, kept for analysis.
pub fn export_hard_items(bundles: &[RolloutBundle]) -> Vec<RolloutBundle> {
    bundles
        .iter()
        .filter(|b| matches!(b.label, DifficultyLabel::Partial | DifficultyLabel::AllWrong))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ProblemState, Rollout, Verdict};

    fn bundle_with_verdicts(id: &str, verdicts: Vec<Verdict>) -> RolloutBundle {
        let label = DifficultyLabel::from_verdicts(&verdicts).unwrap();
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
                    response: format!("response {i}"),
                    parsed_steps: vec![],
                    parsed_final_answer: "a".into(),
                    verdict: v,
                })
                .collect(),
            label,
            source_dataset_id: "ds".into(),
            rescue_rollouts: vec![],
        }
    }

    #[test]
    fn assistant_text_is_first_correct_rollout() {
        use Verdict::*;
        // Correct rollouts at positions 2 and 3 (1-indexed: 2nd and 3rd).
        let bundle = bundle_with_verdicts("q", vec![Incorrect, Correct, Correct]);
        let out = convert_sft(&[bundle]);
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].assistant_text, "response 1");
        assert_eq!(out.records[0].system_text, SFT_SYSTEM_TEXT);
        assert!(out.records[0].user_text.starts_with(INFERENCE_SYSTEM_PROMPT));
        assert!(out.records[0].user_text.ends_with("Problem: question q"));
    }

    #[test]
    fn all_wrong_bundles_are_excluded() {
        use Verdict::*;
        let out = convert_sft(&[bundle_with_verdicts("q", vec![Incorrect, Incorrect])]);
        assert!(out.records.is_empty());
        assert_eq!(out.ineligible, 1);
    }

    #[test]
    fn eligible_plus_ineligible_equals_input() {
        use Verdict::*;
        let bundles = vec![
            bundle_with_verdicts("a", vec![Correct, Correct]),
            bundle_with_verdicts("b", vec![Incorrect, Correct]),
            bundle_with_verdicts("c", vec![Incorrect, Incorrect]),
            bundle_with_verdicts("d", vec![Unparsed, Unparsed]),
        ];
        let out = convert_sft(&bundles);
        assert_eq!(out.eligible + out.ineligible, bundles.len());
        assert_eq!(out.eligible, 2);
    }

    #[test]
    fn sft_assistant_text_is_byte_equal_to_a_correct_response() {
        use Verdict::*;
        let bundles = vec![
            bundle_with_verdicts("a", vec![Correct, Incorrect]),
            bundle_with_verdicts("b", vec![Incorrect, Correct]),
        ];
        let out = convert_sft(&bundles);
        for (record, bundle) in out.records.iter().zip(&bundles) {
            let matching = bundle
                .rollouts
                .iter()
                .find(|r| r.response == record.assistant_text)
                .expect("assistant text must be one of the bundle's responses");
            assert_eq!(matching.verdict, Correct);
        }
    }

    #[test]
    fn hard_export_keeps_partial_and_all_wrong() {
        use Verdict::*;
        let bundles = vec![
            bundle_with_verdicts("a", vec![Correct, Correct]),
            bundle_with_verdicts("b", vec![Incorrect, Correct]),
            bundle_with_verdicts("c", vec![Incorrect, Incorrect]),
        ];
        let hard = export_hard_items(&bundles);
        let ids: Vec<&str> = hard.iter().map(|b| b.question_id.as_str()).collect();
        assert_eq!(ids, vec!["b", "c"]);
    }
}
