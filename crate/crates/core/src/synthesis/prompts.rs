//! The synthesis prompt: difficulty-enhancement strategies, correctness
//! criteria, and the structured output contract for one evolution step.

use crate::gateway::{FieldKind, SchemaSpec};
use crate::model::{ProblemState, ThoughtMode, LIST_JOIN};

pub const SYNTHESIS_SYSTEM_PROMPT: &str = "\
You are a problem designer. Fuse the selected thought mode into the current \
problem state to produce a strictly harder, coherent question.

Macroscopic difficulty enhancement strategies:
(A) Target upgrade: move from single-point answers to structural or global quantities.
(B) Parameterization and generalization: replace concrete values with general forms.
(C) Constraint coupling: introduce interdependent conditions that form simultaneous or boundary constraints.
(D) Reasoning chain extension: create multi-stage dependencies where later steps require earlier results.
(E) Inverse or constructive formulations: derive conditions from results, or construct objects under constraints.
(F) Uncertainty and robustness analysis: add error bounds, worst-case analysis, or sensitivity.
(G) Algorithmic and resource constraints: require implementable solutions with complexity bounds.

Correctness criteria the evolved question must satisfy:
1. Solvability: the evolved question has a derivable solution.
2. Uniqueness: the answer is determinate or disambiguated by a stated rule.
3. Condition consistency: new constraints must not contradict existing ones.
4. Condition necessity: every added condition is explicitly used in the solution.
5. Closed-loop coherence: question, conditions, and solution form a complete reasoning chain.

If the thought mode cannot be coherently fused with the problem state, set \
is_compatible to false and stop.

Output format (strict JSON):
{\"is_compatible\": true/false,
 \"question\": \"evolved problem statement\",
 \"answer\": \"final answer\",
 \"solution_steps\": [\"step 1\", \"step 2\", ...],
 \"S_sum\": \"logic summary\",
 \"S_det\": \"detailed modification description\",
 \"K_gen\": [\"general knowledge 1\", ...],
 \"K_spec\": [\"specific parameter 1\", ...]}
Rules:
- Do not add extra keys; do not wrap in Markdown.";

pub fn synthesis_schema() -> SchemaSpec {
    SchemaSpec::new(&[
        ("is_compatible", FieldKind::Boolean),
        ("question", FieldKind::String),
        ("answer", FieldKind::String),
        ("solution_steps", FieldKind::StringList),
        ("S_sum", FieldKind::String),
        ("S_det", FieldKind::String),
        ("K_gen", FieldKind::StringList),
        ("K_spec", FieldKind::StringList),
    ])
}

/// The incompatible branch only needs the flag; the remaining state
/// fields may be absent or ignored.
pub fn incompatible_schema() -> SchemaSpec {
    SchemaSpec::new(&[("is_compatible", FieldKind::Boolean)])
}

/// User message: the current problem state plus the selected thought
/// mode's four components.
pub fn render_synthesis_prompt(state: &ProblemState, mode: &ThoughtMode) -> String {
    let steps = state
        .solution_steps
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s))
        .collect::<Vec<_>>()
        .join("\n");
    format!(
        "Current problem state:\n\
         Question: {question}\n\
         Answer: {answer}\n\
         Solution steps:\n{steps}\n\
         \n\
         Selected thought mode:\n\
         S_sum: {s_sum}\n\
         S_det: {s_det}\n\
         K_gen: {k_gen}\n\
         K_spec: {k_spec}",
        question = state.question,
        answer = state.answer,
        s_sum = mode.s_sum,
        s_det = mode.s_det,
        k_gen = mode.k_gen.join(LIST_JOIN),
        k_spec = mode.k_spec.join(LIST_JOIN),
    )
}
