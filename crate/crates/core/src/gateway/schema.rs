//! Strict structured-output validation for model responses.
//!
//! Model output is untrusted: this parser is total, returning either a
//! validated document or a typed rejection. It never panics on arbitrary
//! bytes.

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    String,
    StringList,
    Boolean,
}

#[derive(Debug, Clone)]
pub struct SchemaField {
    pub name: &'static str,
    pub kind: FieldKind,
}

#[derive(Debug, Clone)]
pub struct SchemaSpec {
    pub required: Vec<SchemaField>,
    pub forbid_extra_keys: bool,
}

impl SchemaSpec {
    pub fn new(fields: &[(&'static str, FieldKind)]) -> Self {
        SchemaSpec {
            required: fields
                .iter()
                .map(|(name, kind)| SchemaField { name, kind: *kind })
                .collect(),
            forbid_extra_keys: false,
        }
    }

    pub fn strict(mut self) -> Self {
        self.forbid_extra_keys = true;
        self
    }
}

/// Why a response was rejected. A rejection is an expected outcome of
/// talking to a model, not an error condition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    NotParseable,
    MissingKey(String),
    WrongKind(String),
    UnexpectedKey(String),
}

impl std::fmt::Display for Rejection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rejection::NotParseable => write!(f, "not parseable as a JSON object"),
            Rejection::MissingKey(k) => write!(f, "missing key `{k}`"),
            Rejection::WrongKind(k) => write!(f, "wrong kind for key `{k}`"),
            Rejection::UnexpectedKey(k) => write!(f, "unexpected key `{k}`"),
        }
    }
}

/// Strip a single leading/trailing Markdown code fence. Models wrap
/// output in fences despite instructions; the payload is unchanged.
fn strip_code_fence(text: &str) -> &str {
    let trimmed = text.trim();
    if !trimmed.starts_with("```") {
        return trimmed;
    }
    let after_open = match trimmed.find('\n') {
        Some(pos) => &trimmed[pos + 1..],
        None => return trimmed,
    };
    let inner = after_open.trim_end();
    match inner.strip_suffix("```") {
        Some(body) => body.trim_end(),
        None => inner,
    }
}

fn kind_matches(value: &Value, kind: FieldKind) -> bool {
    match kind {
        FieldKind::String => value.is_string(),
        FieldKind::Boolean => value.is_boolean(),
        FieldKind::StringList => match value.as_array() {
            Some(items) => items.iter().all(Value::is_string),
            None => false,
        },
    }
}

/// Parse and validate a model response against a schema. Returns the
/// document as a JSON object map, or the first rejection found.
pub fn parse_structured_output(
    response: &str,
    schema: &SchemaSpec,
) -> Result<Map<String, Value>, Rejection> {
    let payload = strip_code_fence(response);
    let value: Value = serde_json::from_str(payload).map_err(|_| Rejection::NotParseable)?;
    let object = match value {
        Value::Object(map) => map,
        _ => return Err(Rejection::NotParseable),
    };
    for field in &schema.required {
        match object.get(field.name) {
            None => return Err(Rejection::MissingKey(field.name.to_string())),
            Some(value) if !kind_matches(value, field.kind) => {
                return Err(Rejection::WrongKind(field.name.to_string()))
            }
            Some(_) => {}
        }
    }
    if schema.forbid_extra_keys {
        for key in object.keys() {
            if !schema.required.iter().any(|f| f.name == key) {
                return Err(Rejection::UnexpectedKey(key.clone()));
            }
        }
    }
    Ok(object)
}

/// Extract a required string field from a validated document.
pub fn doc_string(doc: &Map<String, Value>, key: &str) -> String {
    doc.get(key)
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string()
}

/// Extract a required string-list field from a validated document.
pub fn doc_string_list(doc: &Map<String, Value>, key: &str) -> Vec<String> {
    doc.get(key)
        .and_then(Value::as_array)
        .map(|items| {
            items
                .iter()
                .filter_map(Value::as_str)
                .map(String::from)
                .collect()
        })
        .unwrap_or_default()
}

pub fn doc_bool(doc: &Map<String, Value>, key: &str) -> bool {
    doc.get(key).and_then(Value::as_bool).unwrap_or(false)
}
