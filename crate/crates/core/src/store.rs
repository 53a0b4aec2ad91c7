//! File-backed per-user storage.
//!
//! ```text
//! <root>/users/<id>/chronicle.jsonl    append-only raw events
//! <root>/users/<id>/enrichment.jsonl   append-only enrichment records
//! <root>/users/<id>/constraints.json   static constraints (optional)
//! <root>/models/<id>.json              model snapshot
//! <root>/cache/                        nutrition client cache
//! ```
//!
//! Each record is written as one line with a single `write_all` and synced.
//! On open, a final line without its newline is a torn write: it is ignored
//! if it does not parse and cut off before the next append.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde_json::Value;
use thiserror::Error;

use crate::chronicle::{event_to_value, parse_event_line, Chronicle, ChronicleError, Event};
use crate::enrichment::{apply_enrichment, EnrichmentRecord};
use crate::model::{load_constraints, ModelError, PersonalFoodModel, StaticConstraint};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StoreError {
    #[error("invalid user id `{0}`")]
    InvalidUserId(String),
    #[error("unknown user `{0}`")]
    UnknownUser(String),
    #[error("event `{0}` already exists with a different body")]
    Conflict(String),
    #[error(transparent)]
    Chronicle(#[from] ChronicleError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("io: {0}")]
    Io(String),
}

fn io(e: std::io::Error) -> StoreError {
    StoreError::Io(e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AppendOutcome {
    Created,
    /// Same event id and identical body already stored.
    Existing,
}

#[derive(Clone, Debug)]
pub struct UserStore {
    root: PathBuf,
    locks: Arc<Mutex<BTreeMap<String, Arc<Mutex<()>>>>>,
}

pub fn valid_user_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

/// Complete lines of a JSONL file, plus whether a torn tail was dropped.
fn read_lines(path: &Path) -> Result<(Vec<String>, bool), StoreError> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok((Vec::new(), false)),
        Err(e) => return Err(io(e)),
    };
    let mut lines: Vec<String> = text.split('\n').map(str::to_string).collect();
    let tail = lines.pop().unwrap_or_default();
    let mut torn = false;
    if !tail.trim().is_empty() {
        if serde_json::from_str::<Value>(&tail).is_ok() {
            lines.push(tail);
        } else {
            torn = true;
        }
    }
    Ok((lines, torn))
}

/// Appends one line, first repairing a torn or unterminated tail.
fn append_line(path: &Path, line: &str) -> Result<(), StoreError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let existing = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(io(e)),
    };
    let mut prefix = String::new();
    if existing.last().is_some_and(|b| *b != b'\n') {
        let cut = existing.iter().rposition(|b| *b == b'\n').map_or(0, |i| i + 1);
        let tail = String::from_utf8_lossy(&existing[cut..]).to_string();
        if serde_json::from_str::<Value>(&tail).is_ok() {
            prefix.push('\n');
        } else {
            let f = OpenOptions::new().write(true).open(path).map_err(io)?;
            f.set_len(cut as u64).map_err(io)?;
            f.sync_all().map_err(io)?;
        }
    }
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(io)?;
    f.write_all(format!("{prefix}{line}\n").as_bytes()).map_err(io)?;
    f.sync_data().map_err(io)
}

impl UserStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(root.join("users")).map_err(io)?;
        Ok(UserStore {
            root,
            locks: Arc::default(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cache_dir(&self) -> PathBuf {
        self.root.join("cache")
    }

    fn user_dir(&self, user: &str) -> Result<PathBuf, StoreError> {
        if !valid_user_id(user) {
            return Err(StoreError::InvalidUserId(user.to_string()));
        }
        Ok(self.root.join("users").join(user))
    }

    pub fn chronicle_path(&self, user: &str) -> Result<PathBuf, StoreError> {
        Ok(self.user_dir(user)?.join("chronicle.jsonl"))
    }

    fn enrichment_path(&self, user: &str) -> Result<PathBuf, StoreError> {
        Ok(self.user_dir(user)?.join("enrichment.jsonl"))
    }

    pub fn model_path(&self, user: &str) -> Result<PathBuf, StoreError> {
        self.user_dir(user)?;
        Ok(self.root.join("models").join(format!("{user}.json")))
    }

    pub fn user_exists(&self, user: &str) -> bool {
        self.chronicle_path(user).is_ok_and(|p| p.exists())
    }

    pub fn users(&self) -> Result<Vec<String>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("users")).map_err(io)? {
            let entry = entry.map_err(io)?;
            let name = entry.file_name().to_string_lossy().to_string();
            if valid_user_id(&name) && entry.path().join("chronicle.jsonl").exists() {
                out.push(name);
            }
        }
        out.sort();
        Ok(out)
    }

    /// Lock serializing writes for one user.
    pub fn user_lock(&self, user: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().expect("lock table poisoned");
        locks.entry(user.to_string()).or_default().clone()
    }

    /// Stored events without enrichment applied.
    pub fn raw_chronicle(&self, user: &str) -> Result<Chronicle, StoreError> {
        let (lines, _) = read_lines(&self.chronicle_path(user)?)?;
        let mut c = Chronicle::new(user);
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let event = parse_event_line(line, i + 1)?;
            c.append(event).map_err(|e| ChronicleError::ParseError {
                line: i + 1,
                reason: e.to_string(),
            })?;
        }
        Ok(c)
    }

    pub fn enrichments(&self, user: &str) -> Result<BTreeMap<String, EnrichmentRecord>, StoreError> {
        let (lines, _) = read_lines(&self.enrichment_path(user)?)?;
        let mut out = BTreeMap::new();
        for (i, line) in lines.iter().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r: EnrichmentRecord = serde_json::from_str(line).map_err(|e| ChronicleError::ParseError {
                line: i + 1,
                reason: format!("enrichment: {e}"),
            })?;
            out.insert(r.event_id.clone(), r);
        }
        Ok(out)
    }

    /// The chronicle with the latest enrichment record applied to each food
    /// event. Fails with `UnknownUser` if nothing was ever stored.
    pub fn chronicle(&self, user: &str) -> Result<Chronicle, StoreError> {
        if !self.chronicle_path(user)?.exists() {
            return Err(StoreError::UnknownUser(user.to_string()));
        }
        let raw = self.raw_chronicle(user)?;
        let records = self.enrichments(user)?;
        if records.is_empty() {
            return Ok(raw);
        }
        let events = raw.events().iter().cloned().map(|mut e| {
            if let Event::Food(f) = &mut e {
                if let Some(r) = records.get(&f.event_id) {
                    apply_enrichment(f, r);
                }
            }
            e
        });
        Ok(Chronicle::from_events(user, events)?)
    }

    /// Appends an event. Replaying an identical event is a no-op; reusing an
    /// id with a different body is a conflict.
    pub fn append_event(&self, user: &str, event: &Event) -> Result<AppendOutcome, StoreError> {
        let lock = self.user_lock(user);
        let _guard = lock.lock().expect("user lock poisoned");
        let path = self.chronicle_path(user)?;
        let current = self.raw_chronicle(user)?;
        if let Some(existing) = current.get(event.id()) {
            return if event_to_value(existing) == event_to_value(event) {
                Ok(AppendOutcome::Existing)
            } else {
                Err(StoreError::Conflict(event.id().to_string()))
            };
        }
        current.check(event)?;
        let line = serde_json::to_string(&event_to_value(event)).expect("values serialize");
        append_line(&path, &line)?;
        Ok(AppendOutcome::Created)
    }

    pub fn append_enrichment(&self, user: &str, record: &EnrichmentRecord) -> Result<(), StoreError> {
        let lock = self.user_lock(user);
        let _guard = lock.lock().expect("user lock poisoned");
        let line = crate::canonical::to_canonical_string(record).expect("records serialize");
        append_line(&self.enrichment_path(user)?, &line)
    }

    pub fn constraints(&self, user: &str) -> Result<Vec<StaticConstraint>, StoreError> {
        let path = self.user_dir(user)?.join("constraints.json");
        if !path.exists() {
            return Ok(Vec::new());
        }
        Ok(load_constraints(&path)?)
    }

    pub fn set_constraints(&self, user: &str, constraints: &[StaticConstraint]) -> Result<(), StoreError> {
        let dir = self.user_dir(user)?;
        fs::create_dir_all(&dir).map_err(io)?;
        let body = crate::canonical::to_canonical_string(&serde_json::json!({ "constraints": constraints }))
            .expect("constraints serialize");
        let tmp = dir.join("constraints.json.tmp");
        fs::write(&tmp, body + "\n").map_err(io)?;
        fs::rename(tmp, dir.join("constraints.json")).map_err(io)
    }

    pub fn save_model(&self, model: &PersonalFoodModel) -> Result<(), StoreError> {
        Ok(model.save(&self.model_path(&model.user_id)?)?)
    }

    pub fn load_model(&self, user: &str) -> Result<Option<PersonalFoodModel>, StoreError> {
        let path = self.model_path(user)?;
        if !path.exists() {
            return Ok(None);
        }
        Ok(Some(PersonalFoodModel::load(&path)?))
    }
}
