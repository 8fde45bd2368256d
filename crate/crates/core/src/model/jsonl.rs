//! One-record-per-line JSON files: every pipeline artifact uses this shape.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> JsonlError {
    JsonlError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            source: e,
        })?;
        out.push(item);
    }
    Ok(out)
}

/// Like `read_jsonl`, but a missing file reads as an empty list. Used by
/// resume logic, where absent output simply means nothing was done yet.
pub fn read_jsonl_or_empty<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    read_jsonl(path)
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), JsonlError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    write_items(path, &mut writer, items)?;
    writer.flush().map_err(|e| io_err(path, e))
}

pub fn append_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), JsonlError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
    }
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    write_items(path, &mut writer, items)?;
    writer.flush().map_err(|e| io_err(path, e))
}

fn write_items<T: Serialize, W: Write>(
    path: &Path,
    writer: &mut W,
    items: &[T],
) -> Result<(), JsonlError> {
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| JsonlError::Parse {
            path: path.display().to_string(),
            line: 0,
            source: e,
        })?;
        writer.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        writer.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ThoughtMode;

    #[test]
    fn roundtrip_and_append() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bank.jsonl");
        let mode = ThoughtMode {
            id: "p#1".into(),
            s_sum: "sum".into(),
            s_det: "det".into(),
            k_gen: vec!["g".into()],
            k_spec: vec![],
            source_problem_id: "p".into(),
            cluster: Some(3),
        };
        write_jsonl(&path, std::slice::from_ref(&mode)).unwrap();
        append_jsonl(&path, std::slice::from_ref(&mode)).unwrap();
        let back: Vec<ThoughtMode> = read_jsonl(&path).unwrap();
        assert_eq!(back, vec![mode.clone(), mode]);
    }

    #[test]
    fn missing_file_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nope.jsonl");
        let got: Vec<ThoughtMode> = read_jsonl_or_empty(&path).unwrap();
        assert!(got.is_empty());
        assert!(read_jsonl::<ThoughtMode>(&path).is_err());
    }

    #[test]
    fn blank_lines_are_skipped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mixed.jsonl");
        std::fs::write(&path, "\n{\"question\":\"q\",\"answer\":\"a\",\"solution_steps\":[],\"step_index\":0}\n\n").unwrap();
        let got: Vec<crate::model::ProblemState> = read_jsonl(&path).unwrap();
        assert_eq!(got.len(), 1);
    }
}
