//! Append-only response store backed by a JSON-lines file.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{RawResponse, ResponseKey};
use crate::promptkit::PromptKey;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("response store {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("response store {path}, line {line}: {source}")]
    Corrupt {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("duplicate record for {0}")]
    Duplicate(ResponseKey),
}

/// Keyed collection of raw responses. At most one record per key; records are
/// never modified once written.
#[derive(Debug, Default)]
pub struct ResponseStore {
    records: BTreeMap<ResponseKey, RawResponse>,
    file: Option<(PathBuf, File)>,
}

impl ResponseStore {
    /// A store that lives only in memory.
    pub fn in_memory() -> Self {
        ResponseStore::default()
    }

    /// Open (or create) a file-backed store and load its records. A final
    /// line without a trailing newline is an interrupted write and is dropped.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let io = |source| StoreError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(io)?;
        }
        let mut records = BTreeMap::new();
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(io(e)),
        };
        // Everything after the last newline is a torn write from an interrupted run.
        let valid_len = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        for (i, line) in bytes[..valid_len].split(|&b| b == b'\n').enumerate() {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let record: RawResponse =
                serde_json::from_slice(line).map_err(|source| StoreError::Corrupt {
                    path: path.display().to_string(),
                    line: i + 1,
                    source,
                })?;
            if records.contains_key(&record.key) {
                return Err(StoreError::Duplicate(record.key));
            }
            records.insert(record.key.clone(), record);
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(io)?;
        // Drop a torn trailing record so the next append starts on a fresh line.
        if bytes.len() != valid_len {
            file.set_len(valid_len as u64).map_err(io)?;
        }
        Ok(ResponseStore {
            records,
            file: Some((path, file)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.file.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn get(&self, key: &ResponseKey) -> Option<&RawResponse> {
        self.records.get(key)
    }

    pub fn contains(&self, key: &ResponseKey) -> bool {
        self.records.contains_key(key)
    }

    /// Append a record, persisting it before it becomes visible.
    pub fn insert(&mut self, record: RawResponse) -> Result<(), StoreError> {
        if self.records.contains_key(&record.key) {
            return Err(StoreError::Duplicate(record.key));
        }
        if let Some((path, file)) = &mut self.file {
            let mut line = serde_json::to_vec(&record).expect("records serialize");
            line.push(b'\n');
            file.write_all(&line)
                .and_then(|()| file.flush())
                .map_err(|source| StoreError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
        }
        self.records.insert(record.key.clone(), record);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> impl Iterator<Item = &RawResponse> {
        self.records.values()
    }

    /// All samples stored for one prompt, in sample-index order.
    pub fn samples_for<'a>(&'a self, prompt: &PromptKey) -> impl Iterator<Item = &'a RawResponse> + 'a {
        let start = ResponseKey::new(prompt.clone(), 0);
        let prompt = prompt.clone();
        self.records
            .range(start..)
            .take_while(move |(k, _)| k.prompt == prompt)
            .map(|(_, r)| r)
    }

    /// Key-to-(text, source) view, independent of timestamps and write order.
    pub fn content(&self) -> BTreeMap<ResponseKey, (String, super::Source)> {
        self.records
            .iter()
            .map(|(k, r)| (k.clone(), (r.text.clone(), r.source)))
            .collect()
    }
}
