use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use crate::cad_seq::tokenize;
use crate::captioning::Split;
use crate::masking::make_gt_mask;
use crate::variation::EditChain;

use super::{Candidate, PipelineError};

/// `source` value of human-selected lines.
pub const SELECTIVE_SOURCE: &str = "selective";

/// Triplet-dataset line plus annotator, timestamp and session provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectiveRecord {
    pub instruction: String,
    pub orig: String,
    pub edit: String,
    pub mask: String,
    pub record: Option<EditChain>,
    pub split: Split,
    pub source: String,
    pub annotator: String,
    /// RFC 3339 UTC.
    pub ts: String,
    pub session: String,
    /// Index of the session history entry the choice belongs to.
    pub entry: usize,
}

impl SelectiveRecord {
    fn same_slot(&self, other: &SelectiveRecord) -> bool {
        self.session == other.session && self.entry == other.entry && self.annotator == other.annotator
    }
}

/// JSONL file of selections with a single in-process writer.
///
/// Each write rewrites the file through a temporary file and an atomic rename.
#[derive(Debug)]
pub struct SelectiveDataset {
    path: PathBuf,
    writer: Mutex<()>,
}

fn io_err(e: impl std::fmt::Display) -> PipelineError {
    PipelineError::Io(e.to_string())
}

impl SelectiveDataset {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        SelectiveDataset { path: path.into(), writer: Mutex::new(()) }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn load(&self) -> Result<Vec<SelectiveRecord>, PipelineError> {
        let text = match fs::read_to_string(&self.path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(io_err(e)),
        };
        text.lines().filter(|l| !l.trim().is_empty()).map(|l| serde_json::from_str(l).map_err(io_err)).collect()
    }

    /// Appends `rec`, or replaces the line with the same session, entry and annotator.
    pub fn upsert(&self, rec: &SelectiveRecord) -> Result<(), PipelineError> {
        let _guard = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        let mut records = self.load()?;
        match records.iter_mut().find(|r| r.same_slot(rec)) {
            Some(slot) => *slot = rec.clone(),
            None => records.push(rec.clone()),
        }
        let mut body = String::new();
        for r in &records {
            body.push_str(&serde_json::to_string(r).map_err(io_err)?);
            body.push('\n');
        }
        if let Some(dir) = self.path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        let tmp = self.path.with_extension(format!("jsonl.tmp-{}", uuid::Uuid::new_v4()));
        let mut f = fs::File::create(&tmp).map_err(io_err)?;
        f.write_all(body.as_bytes()).map_err(io_err)?;
        f.sync_all().map_err(io_err)?;
        fs::rename(&tmp, &self.path).map_err(io_err)
    }
}

/// Records a human choice among generated candidates.
#[allow(clippy::too_many_arguments)]
pub fn record_selection(
    dataset: &SelectiveDataset,
    session: &str,
    entry: usize,
    instruction: &str,
    orig_text: &str,
    candidates: &[Candidate],
    index: usize,
    annotator: &str,
) -> Result<SelectiveRecord, PipelineError> {
    let candidate = candidates.get(index).ok_or_else(|| PipelineError::InvalidCandidate {
        index,
        reason: format!("only {} candidates", candidates.len()),
    })?;
    if !candidate.parse_ok {
        return Err(PipelineError::InvalidCandidate { index, reason: "candidate does not parse".into() });
    }
    let edit = candidate.edit_text.trim().to_string();
    let rec = SelectiveRecord {
        instruction: instruction.to_string(),
        orig: orig_text.to_string(),
        mask: make_gt_mask(&tokenize(orig_text), &tokenize(&edit)).text(),
        edit,
        record: None,
        split: Split::Train,
        source: SELECTIVE_SOURCE.to_string(),
        annotator: annotator.to_string(),
        ts: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
        session: session.to_string(),
        entry,
    };
    dataset.upsert(&rec)?;
    Ok(rec)
}
