//! Document storage for cases, results, sessions and reports.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;

use argverify_core::canonical::{self, FloatStyle};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Case,
    Result,
    Session,
    Report,
}

impl RecordKind {
    pub const ALL: [RecordKind; 4] = [RecordKind::Case, RecordKind::Result, RecordKind::Session, RecordKind::Report];

    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Case => "case",
            RecordKind::Result => "result",
            RecordKind::Session => "session",
            RecordKind::Report => "report",
        }
    }
}

impl fmt::Display for RecordKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One stored document. `body` is canonical JSON and `digest` its SHA-256.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub key: String,
    pub kind: RecordKind,
    pub body: String,
    pub digest: String,
    pub updated_at: DateTime<Utc>,
}

impl StoreRecord {
    pub fn new(kind: RecordKind, key: impl Into<String>, body: String) -> Self {
        let digest = canonical::digest_bytes(body.as_bytes());
        Self { key: key.into(), kind, body, digest, updated_at: Utc::now() }
    }

    pub fn is_intact(&self) -> bool {
        canonical::digest_bytes(self.body.as_bytes()) == self.digest
    }
}

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("store i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("record {kind}/{key} is corrupt: {reason}")]
    Corrupt { kind: RecordKind, key: String, reason: String },
}

/// Whole-record document store. Writes replace a record atomically.
pub trait Store: Send + Sync {
    fn get(&self, kind: RecordKind, key: &str) -> Result<Option<StoreRecord>, StoreError>;
    fn put(&self, kind: RecordKind, key: &str, body: String) -> Result<StoreRecord, StoreError>;
    fn keys(&self, kind: RecordKind) -> Result<Vec<String>, StoreError>;
}

#[derive(Debug, Default)]
pub struct MemStore {
    records: Mutex<HashMap<(RecordKind, String), StoreRecord>>,
}

impl MemStore {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Store for MemStore {
    fn get(&self, kind: RecordKind, key: &str) -> Result<Option<StoreRecord>, StoreError> {
        Ok(self.records.lock().unwrap().get(&(kind, key.to_owned())).cloned())
    }

    fn put(&self, kind: RecordKind, key: &str, body: String) -> Result<StoreRecord, StoreError> {
        let record = StoreRecord::new(kind, key, body);
        self.records.lock().unwrap().insert((kind, key.to_owned()), record.clone());
        Ok(record)
    }

    fn keys(&self, kind: RecordKind) -> Result<Vec<String>, StoreError> {
        let mut keys: Vec<String> = self.records.lock().unwrap().keys().filter(|(k, _)| *k == kind).map(|(_, key)| key.clone()).collect();
        keys.sort();
        Ok(keys)
    }
}

/// One directory per record kind, one canonical JSON file per record.
/// Writes go to a temporary file in the same directory and are renamed
/// into place.
#[derive(Debug)]
pub struct FsStore {
    root: PathBuf,
}

impl FsStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        for kind in RecordKind::ALL {
            std::fs::create_dir_all(root.join(kind.as_str()))?;
        }
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn path(&self, kind: RecordKind, key: &str) -> PathBuf {
        self.root.join(kind.as_str()).join(format!("{}.json", encode_key(key)))
    }
}

impl Store for FsStore {
    fn get(&self, kind: RecordKind, key: &str) -> Result<Option<StoreRecord>, StoreError> {
        let text = match std::fs::read_to_string(self.path(kind, key)) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e.into()),
        };
        let corrupt = |reason: String| StoreError::Corrupt { kind, key: key.to_owned(), reason };
        let record: StoreRecord = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
        if record.key != key || record.kind != kind {
            return Err(corrupt(format!("envelope names {}/{}", record.kind, record.key)));
        }
        if !record.is_intact() {
            return Err(corrupt("digest does not match body".to_owned()));
        }
        Ok(Some(record))
    }

    fn put(&self, kind: RecordKind, key: &str, body: String) -> Result<StoreRecord, StoreError> {
        let record = StoreRecord::new(kind, key, body);
        let text = canonical::to_string(&record, FloatStyle::Exact).map_err(std::io::Error::other)?;
        let dir = self.root.join(kind.as_str());
        let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
        tmp.write_all(text.as_bytes())?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path(kind, key)).map_err(|e| e.error)?;
        Ok(record)
    }

    fn keys(&self, kind: RecordKind) -> Result<Vec<String>, StoreError> {
        let mut keys = Vec::new();
        for entry in std::fs::read_dir(self.root.join(kind.as_str()))? {
            let name = entry?.file_name();
            let Some(stem) = name.to_str().and_then(|n| n.strip_suffix(".json")) else { continue };
            if let Some(key) = decode_key(stem) {
                keys.push(key);
            }
        }
        keys.sort();
        Ok(keys)
    }
}

fn is_plain(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'-' || b == b'_'
}

/// Keys become file names: bytes outside `[A-Za-z0-9_-]` are written as `%XX`.
fn encode_key(key: &str) -> String {
    let mut out = String::with_capacity(key.len());
    for b in key.bytes() {
        if is_plain(b) {
            out.push(b as char);
        } else {
            out.push_str(&format!("%{b:02X}"));
        }
    }
    out
}

fn decode_key(name: &str) -> Option<String> {
    let bytes = name.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'%' {
            let hex = name.get(i + 1..i + 3)?;
            out.push(u8::from_str_radix(hex, 16).ok()?);
            i += 3;
        } else {
            out.push(bytes[i]);
            i += 1;
        }
    }
    String::from_utf8(out).ok()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StoreBackend {
    #[default]
    Fs,
    Memory,
}

impl FromStr for StoreBackend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "fs" => Ok(StoreBackend::Fs),
            "memory" => Ok(StoreBackend::Memory),
            other => Err(format!("unknown store backend `{other}` (expected fs or memory)")),
        }
    }
}
