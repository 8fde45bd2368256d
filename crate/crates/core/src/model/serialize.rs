use super::types::{ProblemState, ThoughtMode};

/// Joins elements inside the knowledge lists. Distinct from the `||`
/// field delimiter so list contents can never be mistaken for a field
/// boundary.
pub const LIST_JOIN: &str = "; ";

/// Canonical thought-mode text fed to embedding providers.
pub fn serialize_logic_text(mode: &ThoughtMode) -> String {
    format!(
        "[LOGIC] Summary: {} || Detail: {} || K_gen: {} || K_spec: {}",
        mode.s_sum,
        mode.s_det,
        mode.k_gen.join(LIST_JOIN),
        mode.k_spec.join(LIST_JOIN)
    )
}

/// Rich problem-state text used by the selector's general-purpose
/// embedding during synthesis.
pub fn serialize_state_text(state: &ProblemState) -> String {
    format!(
        "[STATE] Question: {} || Answer: {} || Solution: {}",
        state.question,
        state.answer,
        state.solution_steps.join(" | ")
    )
}

/// Retriever query text: the raw question, no prefix, untrimmed.
pub fn serialize_query_text(state: &ProblemState) -> String {
    state.question.clone()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mode(k_gen: Vec<&str>, k_spec: Vec<&str>) -> ThoughtMode {
        ThoughtMode {
            id: "m".into(),
            s_sum: "A".into(),
            s_det: "B".into(),
            k_gen: k_gen.into_iter().map(String::from).collect(),
            k_spec: k_spec.into_iter().map(String::from).collect(),
            source_problem_id: "p".into(),
            cluster: None,
        }
    }

    #[test]
    fn logic_text_exact_format() {
        let m = mode(vec!["x"], vec!["y"]);
        assert_eq!(
            serialize_logic_text(&m),
            "[LOGIC] Summary: A || Detail: B || K_gen: x || K_spec: y"
        );
    }

    #[test]
    fn logic_text_joins_lists() {
        let m = mode(vec!["x", "z"], vec!["y"]);
        assert_eq!(
            serialize_logic_text(&m),
            "[LOGIC] Summary: A || Detail: B || K_gen: x; z || K_spec: y"
        );
    }

    #[test]
    fn logic_text_empty_lists_keep_prefixes() {
        let m = mode(vec![], vec![]);
        assert_eq!(
            serialize_logic_text(&m),
            "[LOGIC] Summary: A || Detail: B || K_gen:  || K_spec: "
        );
    }

    #[test]
    fn logic_text_deterministic() {
        let m = mode(vec!["x"], vec!["y"]);
        assert_eq!(serialize_logic_text(&m), serialize_logic_text(&m));
    }

    fn state(q: &str, steps: Vec<&str>) -> ProblemState {
        ProblemState {
            question: q.into(),
            answer: "1".into(),
            solution_steps: steps.into_iter().map(String::from).collect(),
            step_index: 0,
        }
    }

    #[test]
    fn state_text_exact_format() {
        let s = state("Q", vec!["s1", "s2"]);
        assert_eq!(
            serialize_state_text(&s),
            "[STATE] Question: Q || Answer: 1 || Solution: s1 | s2"
        );
    }

    #[test]
    fn state_text_single_step_has_no_bar() {
        let s = state("Q", vec!["only"]);
        let text = serialize_state_text(&s);
        assert!(text.ends_with("Solution: only"));
        assert!(!text["[STATE] Question: Q || Answer: 1 || Solution: ".len()..].contains(" | "));
        assert_eq!(serialize_state_text(&s), text);
    }

    #[test]
    fn query_text_is_verbatim_question() {
        let s = state("Find x.", vec!["s"]);
        assert_eq!(serialize_query_text(&s), "Find x.");
        let padded = state("  spaced  ", vec!["s"]);
        assert_eq!(serialize_query_text(&padded), "  spaced  ");
    }

    #[test]
    fn query_and_state_texts_differ() {
        let s = state("Find x.", vec!["s1"]);
        assert_ne!(serialize_query_text(&s), serialize_state_text(&s));
    }
}
