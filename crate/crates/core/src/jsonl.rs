//! Line-delimited JSON records.

use std::fs;
use std::io;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
}

impl RecordError {
    pub(crate) fn io(path: &Path, source: io::Error) -> Self {
        RecordError::Io { path: path.display().to_string(), source }
    }
}

pub fn to_string<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        // Serialization of these plain-data types cannot fail.
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write<T: Serialize>(path: &Path, records: &[T]) -> Result<(), RecordError> {
    fs::write(path, to_string(records)).map_err(|e| RecordError::io(path, e))
}

/// Parses records; blank lines are ignored, line numbers are 1-based.
pub fn parse<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, RecordError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line)
            .map_err(|e| RecordError::MalformedRecord { line: i + 1, message: e.to_string() })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, RecordError> {
    let text = fs::read_to_string(path).map_err(|e| RecordError::io(path, e))?;
    parse(&text)
}
