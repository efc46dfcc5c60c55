//! Locate-then-infill editing.
//!
//! `locate` asks the model for a masked copy of the original sequence and
//! keeps the first answer that is the original with whole spans replaced by
//! `<mask>`. `infill` asks for the edited sequence given that mask. `edit`
//! runs one locate and `k` independent infills.

mod scripted;
mod selective;

use std::thread;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cad_seq::{parse, serialize, tokenize, validate, CadModel, ValidationConfig};
use crate::captioning::Dataset;
use crate::masking::{extract_fills, verify_consistency, MaskedSequence};

pub use scripted::ScriptedBackend;
pub use selective::{record_selection, SelectiveDataset, SelectiveRecord, SELECTIVE_SOURCE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PipelineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("masked sequence is not the original with spans replaced by <mask>")]
    InconsistentMask,
    #[error("locating produced no consistent mask in {attempts} attempts")]
    LocatingFailed { attempts: usize },
    #[error("model backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("candidate {index} cannot be selected: {reason}")]
    InvalidCandidate { index: usize, reason: String },
    #[error("selective dataset I/O failed: {0}")]
    Io(String),
}

/// Decoding parameters forwarded to the model backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
    pub seed: Option<u64>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig { temperature: 0.9, top_p: 0.9, max_tokens: 1024, seed: None }
    }
}

impl SamplingConfig {
    /// Copy whose seed is offset by `offset` from the base seed (0 when unset).
    pub fn with_seed_offset(&self, offset: u64) -> Self {
        SamplingConfig { seed: Some(self.seed.unwrap_or(0).wrapping_add(offset)), ..*self }
    }

    fn check(&self) -> Result<(), PipelineError> {
        if !(self.temperature >= 0.0) || !(self.top_p > 0.0 && self.top_p <= 1.0) || self.max_tokens == 0 {
            return Err(PipelineError::InvalidInput(format!("sampling parameters out of range: {self:?}")));
        }
        Ok(())
    }
}

/// Text-in, text-out language model.
pub trait ModelBackend: Send + Sync {
    fn complete(&self, prompt: &str, sampling: &SamplingConfig) -> Result<String, PipelineError>;
}

pub fn build_locating_prompt(orig_text: &str, instruction: &str) -> Result<String, PipelineError> {
    if orig_text.trim().is_empty() || instruction.trim().is_empty() {
        return Err(PipelineError::InvalidInput("original sequence and instruction must be non-empty".into()));
    }
    Ok(format!(
        "Below is a Computer-Aided Design (CAD) operation sequence. Replace the parts that need to be modified with the string \"<mask>\" according to the editing instruction.\n\n\
         Original CAD Operation Sequence:\n\n{orig_text}\n\n\
         Editing Instruction:\n\n{instruction}\n\n\
         Masked CAD Operation Sequence:\n\n"
    ))
}

pub fn build_infilling_prompt(orig_text: &str, instruction: &str, masked_text: &str) -> Result<String, PipelineError> {
    if orig_text.trim().is_empty() || instruction.trim().is_empty() {
        return Err(PipelineError::InvalidInput("original sequence and instruction must be non-empty".into()));
    }
    if !verify_consistency(&tokenize(orig_text), &MaskedSequence::parse(masked_text)) {
        return Err(PipelineError::InconsistentMask);
    }
    Ok(format!(
        "Below is the original Computer-Aided Design (CAD) operation sequence.\n\n\
         Original CAD Operation Sequence:\n\n{orig_text}\n\n\
         The parts that need to be modified according to the editing instruction have been replaced by the string \"<mask>\".\n\n\
         Editing Instruction:\n\n{instruction}\n\n\
         Masked CAD Operation Sequence:\n\n{masked_text}\n\n\
         Generate the edited CAD sequence that could replace \"<mask>\" in the CAD model:\n"
    ))
}

fn check_model(orig: &CadModel) -> Result<(), PipelineError> {
    let report = validate(orig, &ValidationConfig::UNBOUNDED);
    if !report.is_valid {
        return Err(PipelineError::InvalidInput(format!("original model is invalid: {:?}", report.errors)));
    }
    Ok(())
}

/// Samples masked sequences until one is consistent with `orig`; `retries` extra
/// attempts after the first, each with the next seed.
pub fn locate(
    orig: &CadModel,
    instruction: &str,
    backend: &dyn ModelBackend,
    sampling: &SamplingConfig,
    retries: usize,
) -> Result<MaskedSequence, PipelineError> {
    check_model(orig)?;
    sampling.check()?;
    let orig_text = serialize(orig);
    let orig_tokens = tokenize(&orig_text);
    let prompt = build_locating_prompt(&orig_text, instruction)?;
    for attempt in 0..=retries {
        let completion = backend.complete(&prompt, &sampling.with_seed_offset(attempt as u64))?;
        let masked = MaskedSequence::parse(&completion);
        if verify_consistency(&orig_tokens, &masked) {
            return Ok(masked);
        }
    }
    Err(PipelineError::LocatingFailed { attempts: retries + 1 })
}

/// One generated edit and its checks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    /// Completion as returned by the backend.
    pub edit_text: String,
    pub parse_ok: bool,
    /// Unmasked spans of the masked sequence appear verbatim and in order.
    pub consistency_ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Candidate {
    fn from_completion(completion: String, masked: &MaskedSequence) -> Self {
        let parsed = parse(&completion);
        Candidate {
            consistency_ok: extract_fills(masked, &tokenize(&completion)).is_some(),
            parse_ok: parsed.is_ok(),
            error: parsed.err().map(|e| e.to_string()),
            edit_text: completion,
        }
    }

    fn failed(error: String) -> Self {
        Candidate { edit_text: String::new(), parse_ok: false, consistency_ok: false, error: Some(error) }
    }
}

pub fn infill(
    orig: &CadModel,
    instruction: &str,
    masked: &MaskedSequence,
    backend: &dyn ModelBackend,
    sampling: &SamplingConfig,
) -> Result<Candidate, PipelineError> {
    let prompt = build_infilling_prompt(&serialize(orig), instruction, &masked.text())?;
    let completion = backend.complete(&prompt, sampling)?;
    Ok(Candidate::from_completion(completion, masked))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EditOptions {
    pub k: usize,
    pub sampling: SamplingConfig,
    pub retries: usize,
    /// Run the `k` infill requests on separate threads.
    pub parallel: bool,
}

impl Default for EditOptions {
    fn default() -> Self {
        EditOptions { k: 5, sampling: SamplingConfig::default(), retries: 3, parallel: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditResult {
    pub masked: MaskedSequence,
    /// In generation order; always `k` entries.
    pub candidates: Vec<Candidate>,
    pub k: usize,
}

/// One locate call then `k` infill samples sharing its mask. Candidate `i`
/// uses seed offset `i`; a failed sample is recorded in its flags.
pub fn edit(
    orig: &CadModel,
    instruction: &str,
    backend: &dyn ModelBackend,
    opts: &EditOptions,
) -> Result<EditResult, PipelineError> {
    if opts.k == 0 {
        return Err(PipelineError::InvalidInput("k must be at least 1".into()));
    }
    let masked = locate(orig, instruction, backend, &opts.sampling, opts.retries)?;
    let sample = |i: usize| {
        infill(orig, instruction, &masked, backend, &opts.sampling.with_seed_offset(i as u64))
            .unwrap_or_else(|e| Candidate::failed(e.to_string()))
    };
    let candidates = if opts.parallel && opts.k > 1 {
        thread::scope(|s| {
            let handles: Vec<_> = (0..opts.k).map(|i| s.spawn(move || sample(i))).collect();
            handles.into_iter().map(|h| h.join().expect("infill worker panicked")).collect()
        })
    } else {
        (0..opts.k).map(sample).collect()
    };
    Ok(EditResult { masked, candidates, k: opts.k })
}

/// One line of a batch results file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResultLine {
    pub orig: String,
    pub instruction: String,
    pub masked: Option<String>,
    pub candidates: Vec<Candidate>,
    pub k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Runs `edit` on every triplet of `testset`, in order. Examples whose
/// locating stage fails get `k` failed candidates.
pub fn run_batch(
    testset: &Dataset,
    backend: &dyn ModelBackend,
    opts: &EditOptions,
) -> Result<Vec<ResultLine>, PipelineError> {
    if opts.k == 0 {
        return Err(PipelineError::InvalidInput("k must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(testset.len());
    for t in &testset.triplets {
        let base = ResultLine {
            orig: t.orig_text.clone(),
            instruction: t.instruction.text.clone(),
            masked: None,
            candidates: Vec::new(),
            k: opts.k,
            error: None,
        };
        let line = match parse(&t.orig_text)
            .map_err(|e| PipelineError::InvalidInput(e.to_string()))
            .and_then(|orig| edit(&orig, &t.instruction.text, backend, opts))
        {
            Ok(r) => ResultLine { masked: Some(r.masked.text()), candidates: r.candidates, ..base },
            Err(e @ PipelineError::BackendUnavailable(_)) => return Err(e),
            Err(e) => ResultLine {
                candidates: vec![Candidate::failed(e.to_string()); opts.k],
                error: Some(e.to_string()),
                ..base
            },
        };
        out.push(line);
    }
    Ok(out)
}
