//! Canonical line-delimited JSON.
//!
//! Canonical form: UTF-8, one record per line, object keys sorted, no extra
//! whitespace. All persisted artifacts (corpus files, embedding sidecars,
//! transcripts, reports) go through this writer so byte-level reproducibility
//! never depends on hash-map iteration order.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

/// Serializes a record as a single canonical JSON line (no trailing newline).
pub fn canonical_line<T: Serialize>(record: &T) -> Result<String> {
    let value = serde_json::to_value(record)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    let mut out = String::new();
    write_canonical(&value, &mut out);
    Ok(out)
}

fn write_canonical(value: &Value, out: &mut String) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push('{');
            for (i, key) in keys.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&Value::String((*key).clone()).to_string());
                out.push(':');
                write_canonical(&map[*key], out);
            }
            out.push('}');
        }
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_canonical(item, out);
            }
            out.push(']');
        }
        scalar => out.push_str(&scalar.to_string()),
    }
}

/// Writes records as canonical lines, one per record, trailing newline.
pub fn write_file<T: Serialize>(path: &Path, records: impl IntoIterator<Item = T>) -> Result<()> {
    let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
    for record in records {
        let line = canonical_line(&record)?;
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Reads a line-delimited record file, reporting the 1-based line number of
/// the first malformed record. Blank lines are ignored.
pub fn read_file<T: DeserializeOwned>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        records.push((idx + 1, record));
    }
    Ok(records)
}
