//! Persisted interactive editing sessions.
//!
//! One JSON file per session under `<dir>/sessions/`. Every write goes to a
//! temporary file in the same directory and is renamed over the target, so a
//! session file is always a complete document.

use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use uuid::Uuid;

use crate::cad_seq::{parse, serialize, validate, CadModel, ParseError, ValidationConfig, ValidationIssue};
use crate::geometry::is_renderable;
use crate::pipeline::{
    edit, record_selection, Candidate, EditOptions, EditResult, ModelBackend, PipelineError, SelectiveDataset,
};

/// Candidates requested when an instruction does not say.
pub const DEFAULT_K: usize = 5;

const PROBE_POINTS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("invalid model: {message}")]
    InvalidModel { message: String, parse: Option<ParseError>, issues: Vec<ValidationIssue> },
    #[error("candidate {index} cannot be selected: {reason}")]
    InvalidCandidate { index: usize, reason: String },
    #[error("session has no instruction to select from")]
    NoCandidates,
    #[error(transparent)]
    Pipeline(PipelineError),
    #[error("session store I/O failed: {0}")]
    Io(String),
}

impl From<PipelineError> for SessionError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::InvalidCandidate { index, reason } => SessionError::InvalidCandidate { index, reason },
            other => SessionError::Pipeline(other),
        }
    }
}

fn io_err(e: impl std::fmt::Display) -> SessionError {
    SessionError::Io(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub index: usize,
    pub annotator: String,
    pub ts: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub instruction: String,
    /// Canonical text of the model the instruction was applied to.
    pub orig: String,
    pub masked: String,
    pub candidates: Vec<Candidate>,
    pub k: usize,
    pub selection: Option<Selection>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditSession {
    pub id: String,
    /// Canonical text of the model the session started from.
    pub original: String,
    /// Canonical text of the current model; always parses, validates and renders.
    pub current: String,
    pub history: Vec<HistoryEntry>,
    pub created: DateTime<Utc>,
    pub updated: DateTime<Utc>,
}

impl EditSession {
    pub fn current_model(&self) -> CadModel {
        parse(&self.current).expect("session current is valid")
    }

    /// Recomputes `current` from `original` and the recorded selections.
    pub fn replay(&self) -> Result<String, SessionError> {
        let mut current = self.original.clone();
        for entry in &self.history {
            if let Some(sel) = &entry.selection {
                let c = entry.candidates.get(sel.index).ok_or(SessionError::InvalidCandidate {
                    index: sel.index,
                    reason: "selection outside candidate list".into(),
                })?;
                current = checked_model(&c.edit_text)
                    .map(|m| serialize(&m))
                    .map_err(|e| SessionError::InvalidCandidate { index: sel.index, reason: e.to_string() })?;
            }
        }
        Ok(current)
    }
}

/// Parses, validates and test-renders a model text.
pub fn checked_model(text: &str) -> Result<CadModel, SessionError> {
    let model = parse(text).map_err(|e| SessionError::InvalidModel {
        message: e.to_string(),
        parse: Some(e),
        issues: Vec::new(),
    })?;
    let report = validate(&model, &ValidationConfig::UNBOUNDED);
    if !report.is_valid {
        let message = report.errors.iter().map(|i| format!("{}: {}", i.path, i.message)).collect::<Vec<_>>().join("; ");
        return Err(SessionError::InvalidModel { message, parse: None, issues: report.errors });
    }
    if !is_renderable::<f64>(&model, PROBE_POINTS) {
        return Err(SessionError::InvalidModel {
            message: "model has no solid surface".into(),
            parse: None,
            issues: Vec::new(),
        });
    }
    Ok(model)
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 64 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-')
}

/// Directory of session files plus the selective dataset they feed.
#[derive(Debug)]
pub struct SessionStore {
    dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    selective: SelectiveDataset,
}

impl SessionStore {
    pub fn open(dir: impl Into<PathBuf>, selective_path: impl Into<PathBuf>) -> Result<Self, SessionError> {
        let dir = dir.into();
        fs::create_dir_all(dir.join("sessions")).map_err(io_err)?;
        Ok(SessionStore { dir, locks: Mutex::new(HashMap::new()), selective: SelectiveDataset::new(selective_path) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn selective(&self) -> &SelectiveDataset {
        &self.selective
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join("sessions").join(format!("{id}.json"))
    }

    fn lock(&self, id: &str) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|p| p.into_inner());
        locks.entry(id.to_string()).or_default().clone()
    }

    fn write(&self, s: &EditSession) -> Result<(), SessionError> {
        let path = self.path(&s.id);
        let tmp = path.with_extension(format!("json.tmp-{}", Uuid::new_v4()));
        let body = serde_json::to_vec_pretty(s).map_err(io_err)?;
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(&body).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
        fs::rename(&tmp, &path).map_err(io_err)
    }

    fn read(&self, id: &str) -> Result<EditSession, SessionError> {
        if !valid_id(id) {
            return Err(SessionError::UnknownSession(id.to_string()));
        }
        let body = match fs::read(self.path(id)) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(SessionError::UnknownSession(id.to_string()))
            }
            Err(e) => return Err(io_err(e)),
        };
        serde_json::from_slice(&body).map_err(io_err)
    }

    pub fn create(&self, orig_text: &str) -> Result<EditSession, SessionError> {
        let text = serialize(&checked_model(orig_text)?);
        let now = Utc::now();
        let s = EditSession {
            id: Uuid::new_v4().to_string(),
            original: text.clone(),
            current: text,
            history: Vec::new(),
            created: now,
            updated: now,
        };
        self.write(&s)?;
        Ok(s)
    }

    pub fn get(&self, id: &str) -> Result<EditSession, SessionError> {
        self.read(id)
    }

    /// Runs the editing pipeline on the current model and appends the result.
    /// The session is unchanged when the pipeline fails.
    pub fn submit_instruction(
        &self,
        id: &str,
        instruction: &str,
        k: Option<usize>,
        backend: &dyn ModelBackend,
        opts: &EditOptions,
    ) -> Result<(EditSession, EditResult), SessionError> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut s = self.read(id)?;
        let opts = EditOptions { k: k.unwrap_or(DEFAULT_K), ..*opts };
        let result = edit(&s.current_model(), instruction, backend, &opts)?;
        s.history.push(HistoryEntry {
            instruction: instruction.to_string(),
            orig: s.current.clone(),
            masked: result.masked.text(),
            candidates: result.candidates.clone(),
            k: result.k,
            selection: None,
        });
        s.updated = Utc::now();
        self.write(&s)?;
        Ok((s, result))
    }

    /// Makes candidate `index` of the latest entry the current model and
    /// records the choice in the selective dataset.
    pub fn apply_selection(&self, id: &str, index: usize, annotator: &str) -> Result<EditSession, SessionError> {
        let lock = self.lock(id);
        let _guard = lock.lock().unwrap_or_else(|p| p.into_inner());
        let mut s = self.read(id)?;
        let entry_index = s.history.len().checked_sub(1).ok_or(SessionError::NoCandidates)?;
        let entry = &s.history[entry_index];
        let candidate = entry.candidates.get(index).ok_or_else(|| SessionError::InvalidCandidate {
            index,
            reason: format!("only {} candidates", entry.candidates.len()),
        })?;
        if !candidate.parse_ok {
            return Err(SessionError::InvalidCandidate { index, reason: "candidate does not parse".into() });
        }
        let model = checked_model(&candidate.edit_text)
            .map_err(|e| SessionError::InvalidCandidate { index, reason: e.to_string() })?;
        record_selection(
            &self.selective,
            &s.id,
            entry_index,
            &entry.instruction,
            &entry.orig,
            &entry.candidates,
            index,
            annotator,
        )?;
        let now = Utc::now();
        s.history[entry_index].selection = Some(Selection { index, annotator: annotator.to_string(), ts: now });
        s.current = serialize(&model);
        s.updated = now;
        self.write(&s)?;
        Ok(s)
    }

    /// Candidate `index` of the latest entry as a checked model.
    pub fn candidate_model(&self, id: &str, index: usize) -> Result<CadModel, SessionError> {
        let s = self.read(id)?;
        let entry = s.history.last().ok_or(SessionError::NoCandidates)?;
        let c = entry.candidates.get(index).ok_or_else(|| SessionError::InvalidCandidate {
            index,
            reason: format!("only {} candidates", entry.candidates.len()),
        })?;
        checked_model(&c.edit_text).map_err(|e| SessionError::InvalidCandidate { index, reason: e.to_string() })
    }
}
