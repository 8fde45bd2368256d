//! Python bindings for the core types and the deterministic operations:
//! text serialization, window partitioning, selector math, k-means,
//! structured-output parsing, inner-product search, and labeling.

// The #[pyfunction] expansion trips this lint on PyResult returns.
#![allow(clippy::useless_conversion)]

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use modeforge::extract;
use modeforge::gateway::{self, FieldKind, SchemaSpec};
use modeforge::model::{self, DifficultyLabel, Verdict};
use modeforge::retrieval::{IndexEntry, VectorIndex};
use modeforge::synthesis;

#[pyclass(name = "ThoughtMode")]
#[derive(Clone)]
struct PyThoughtMode {
    inner: model::ThoughtMode,
}

#[pymethods]
impl PyThoughtMode {
    #[new]
    #[pyo3(signature = (id, s_sum, s_det, k_gen, k_spec, source_problem_id, cluster=None))]
    fn new(
        id: String,
        s_sum: String,
        s_det: String,
        k_gen: Vec<String>,
        k_spec: Vec<String>,
        source_problem_id: String,
        cluster: Option<usize>,
    ) -> PyResult<Self> {
        let inner = model::ThoughtMode {
            id,
            s_sum,
            s_det,
            k_gen,
            k_spec,
            source_problem_id,
            cluster,
        };
        inner
            .validate()
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(PyThoughtMode { inner })
    }

    #[getter]
    fn id(&self) -> &str {
        &self.inner.id
    }

    #[getter]
    fn s_sum(&self) -> &str {
        &self.inner.s_sum
    }

    #[getter]
    fn s_det(&self) -> &str {
        &self.inner.s_det
    }

    #[getter]
    fn k_gen(&self) -> Vec<String> {
        self.inner.k_gen.clone()
    }

    #[getter]
    fn k_spec(&self) -> Vec<String> {
        self.inner.k_spec.clone()
    }

    #[getter]
    fn cluster(&self) -> Option<usize> {
        self.inner.cluster
    }

    fn logic_text(&self) -> String {
        model::serialize_logic_text(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("ThoughtMode(id={:?})", self.inner.id)
    }
}

#[pyclass(name = "ProblemState")]
#[derive(Clone)]
struct PyProblemState {
    inner: model::ProblemState,
}

#[pymethods]
impl PyProblemState {
    #[new]
    #[pyo3(signature = (question, answer, solution_steps, step_index=0))]
    fn new(
        question: String,
        answer: String,
        solution_steps: Vec<String>,
        step_index: usize,
    ) -> Self {
        PyProblemState {
            inner: model::ProblemState {
                question,
                answer,
                solution_steps,
                step_index,
            },
        }
    }

    #[getter]
    fn question(&self) -> &str {
        &self.inner.question
    }

    #[getter]
    fn answer(&self) -> &str {
        &self.inner.answer
    }

    #[getter]
    fn solution_steps(&self) -> Vec<String> {
        self.inner.solution_steps.clone()
    }

    #[getter]
    fn step_index(&self) -> usize {
        self.inner.step_index
    }

    fn state_text(&self) -> String {
        model::serialize_state_text(&self.inner)
    }

    fn query_text(&self) -> String {
        model::serialize_query_text(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("ProblemState(step_index={})", self.inner.step_index)
    }
}

#[pyfunction]
fn serialize_logic_text(mode: &PyThoughtMode) -> String {
    model::serialize_logic_text(&mode.inner)
}

#[pyfunction]
fn serialize_state_text(state: &PyProblemState) -> String {
    model::serialize_state_text(&state.inner)
}

#[pyfunction]
fn serialize_query_text(state: &PyProblemState) -> String {
    model::serialize_query_text(&state.inner)
}

/// Tail-first window partitioning; returns windows in front-to-back order.
#[pyfunction]
fn partition_windows(solution_steps: Vec<String>, w: usize) -> PyResult<Vec<Vec<String>>> {
    extract::partition_windows(&solution_steps, w)
        .map(|windows| windows.into_iter().map(|win| win.steps).collect())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pyfunction]
fn margin_loss(sim_pos: f64, sim_negs: Vec<f64>, margin: f64) -> f64 {
    modeforge::retrieval::margin_loss(sim_pos, &sim_negs, margin)
}

#[pyfunction]
fn scarcity_reward(p_ref: f64, p_gen: f64, epsilon: f64) -> f64 {
    synthesis::scarcity_reward(p_ref, p_gen, epsilon)
}

#[pyfunction]
fn score_candidate(state_sim: f64, scarcity: f64, alpha: f64) -> f64 {
    synthesis::score_candidate(state_sim, scarcity, alpha)
}

#[pyfunction]
fn softmax_probabilities(scores: Vec<f64>, tau: f64) -> Vec<f64> {
    synthesis::softmax_probabilities(&scores, tau)
}

/// Sample one index from the tempered softmax, seeded for replay.
#[pyfunction]
fn sample_candidate(scores: Vec<f64>, tau: f64, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    synthesis::sample_candidate(&scores, tau, &mut rng)
}

/// K-means over raw vectors; returns (centroids, assignments).
#[pyfunction]
fn fit_kmeans(
    vectors: Vec<Vec<f64>>,
    k: usize,
    seed: u64,
) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let items: Vec<(String, Vec<f64>)> = vectors
        .into_iter()
        .enumerate()
        .map(|(i, v)| (format!("{i:08}"), v))
        .collect();
    let model = synthesis::fit_kmeans(&items, k, seed)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let assignments: Vec<usize> = items
        .iter()
        .map(|(id, _)| model.cluster_of(id).unwrap_or(0))
        .collect();
    Ok((model.centroids, assignments))
}

#[pyfunction]
fn label_difficulty(verdicts: Vec<String>) -> PyResult<String> {
    let parsed: Vec<Verdict> = verdicts
        .iter()
        .map(|v| match v.as_str() {
            "correct" => Ok(Verdict::Correct),
            "incorrect" => Ok(Verdict::Incorrect),
            "unparsed" => Ok(Verdict::Unparsed),
            other => Err(PyValueError::new_err(format!("unknown verdict `{other}`"))),
        })
        .collect::<PyResult<_>>()?;
    let label = DifficultyLabel::from_verdicts(&parsed)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(match label {
        DifficultyLabel::AllCorrect => "all_correct".to_string(),
        DifficultyLabel::Partial => "partial".to_string(),
        DifficultyLabel::AllWrong => "all_wrong".to_string(),
    })
}

/// Saturation check: same question text and both knowledge lists empty.
#[pyfunction]
fn detect_saturation(
    previous_question: &str,
    evolved_question: &str,
    k_gen: Vec<String>,
    k_spec: Vec<String>,
) -> bool {
    previous_question == evolved_question && k_gen.is_empty() && k_spec.is_empty()
}

fn json_to_py(py: Python<'_>, value: &serde_json::Value) -> PyResult<PyObject> {
    Ok(match value {
        serde_json::Value::Null => py.None(),
        serde_json::Value::Bool(b) => PyBool::new_bound(py, *b).into_py(py),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_py(py)
            } else {
                n.as_f64().unwrap_or(f64::NAN).into_py(py)
            }
        }
        serde_json::Value::String(s) => s.into_py(py),
        serde_json::Value::Array(items) => {
            let list = PyList::empty_bound(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_py(py)
        }
        serde_json::Value::Object(map) => {
            let dict = PyDict::new_bound(py);
            for (k, v) in map {
                dict.set_item(k, json_to_py(py, v)?)?;
            }
            dict.into_py(py)
        }
    })
}

/// Validate a model response against `[(name, kind)]` with kind in
/// {"string", "string_list", "boolean"}. Returns the document as a dict
/// or raises ValueError with the rejection reason.
#[pyfunction]
#[pyo3(signature = (response, fields, forbid_extra_keys=false))]
fn parse_structured_output(
    py: Python<'_>,
    response: &str,
    fields: Vec<(String, String)>,
    forbid_extra_keys: bool,
) -> PyResult<PyObject> {
    let mut spec_fields: Vec<(&'static str, FieldKind)> = Vec::new();
    for (name, kind) in &fields {
        let kind = match kind.as_str() {
            "string" => FieldKind::String,
            "string_list" => FieldKind::StringList,
            "boolean" => FieldKind::Boolean,
            other => {
                return Err(PyValueError::new_err(format!(
                    "unknown field kind `{other}`"
                )))
            }
        };
        // SchemaSpec holds &'static str names; the handful of names a
        // binding call builds is bounded by the caller's schemas.
        spec_fields.push((Box::leak(name.clone().into_boxed_str()), kind));
    }
    let mut schema = SchemaSpec::new(&spec_fields);
    if forbid_extra_keys {
        schema = schema.strict();
    }
    match gateway::parse_structured_output(response, &schema) {
        Ok(doc) => json_to_py(py, &serde_json::Value::Object(doc)),
        Err(rejection) => Err(PyValueError::new_err(rejection.to_string())),
    }
}

/// Exact inner-product top-m over (id, vector) entries.
#[pyfunction]
#[pyo3(signature = (entries, query, m, exclude=None))]
fn search_top_m(
    entries: Vec<(String, Vec<f64>)>,
    query: Vec<f64>,
    m: usize,
    exclude: Option<String>,
) -> PyResult<Vec<(String, f64)>> {
    let index = VectorIndex::new(
        entries
            .into_iter()
            .map(|(mode_id, vector)| IndexEntry { mode_id, vector })
            .collect(),
    );
    index
        .search_top_m(&query, m, exclude.as_deref())
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

#[pymodule]
fn modeforge_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyThoughtMode>()?;
    m.add_class::<PyProblemState>()?;
    m.add_function(wrap_pyfunction!(serialize_logic_text, m)?)?;
    m.add_function(wrap_pyfunction!(serialize_state_text, m)?)?;
    m.add_function(wrap_pyfunction!(serialize_query_text, m)?)?;
    m.add_function(wrap_pyfunction!(partition_windows, m)?)?;
    m.add_function(wrap_pyfunction!(margin_loss, m)?)?;
    m.add_function(wrap_pyfunction!(scarcity_reward, m)?)?;
    m.add_function(wrap_pyfunction!(score_candidate, m)?)?;
    m.add_function(wrap_pyfunction!(softmax_probabilities, m)?)?;
    m.add_function(wrap_pyfunction!(sample_candidate, m)?)?;
    m.add_function(wrap_pyfunction!(fit_kmeans, m)?)?;
    m.add_function(wrap_pyfunction!(label_difficulty, m)?)?;
    m.add_function(wrap_pyfunction!(detect_saturation, m)?)?;
    m.add_function(wrap_pyfunction!(parse_structured_output, m)?)?;
    m.add_function(wrap_pyfunction!(search_top_m, m)?)?;
    Ok(())
}
