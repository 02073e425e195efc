//! Canonical JSON and JSONL stage files.
//!
//! Canonical form: object keys sorted lexicographically, no insignificant
//! whitespace, one object per line, LF line endings.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}:{line}: {source}")]
    Decode {
        path: String,
        line: usize,
        source: serde_json::Error,
    },
    #[error("encode error: {0}")]
    Encode(#[from] serde_json::Error),
}

/// Serializes `value` with sorted object keys.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    // serde_json::Map is a BTreeMap unless `preserve_order` is enabled, which
    // this crate never turns on; routing through Value sorts every level.
    let v = serde_json::to_value(value)?;
    serde_json::to_string(&v)
}

/// Renders records as canonical JSONL bytes.
pub fn to_jsonl<T: Serialize>(records: &[T]) -> Result<String, serde_json::Error> {
    let mut out = String::new();
    for r in records {
        out.push_str(&canonical_json(r)?);
        out.push('\n');
    }
    Ok(out)
}

/// Parses JSONL text; blank lines are ignored.
pub fn from_jsonl<T: DeserializeOwned>(text: &str, origin: &str) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|source| JsonlError::Decode {
            path: origin.to_string(),
            line: idx + 1,
            source,
        })?;
        out.push(rec);
    }
    Ok(out)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let text = fs::read_to_string(path).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_jsonl(&text, &path.display().to_string())
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), JsonlError> {
    let text = to_jsonl(records)?;
    write_atomic(path, text.as_bytes()).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Writes to a sibling temp file then renames, so readers never observe a
/// partially written stage file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    let tmp = path.with_file_name(format!(".{file_name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest over several files, each contributing its name and contents.
/// Missing files contribute their name only.
pub fn digest_files(paths: &[&Path]) -> String {
    let mut hasher = Sha256::new();
    for p in paths {
        hasher.update(p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        hasher.update([0u8]);
        if let Ok(bytes) = fs::read(p) {
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
    }
    hex::encode(hasher.finalize())
}
