//! Instruction synthesis for CAD pairs.
//!
//! Stepwise captioning makes four backend calls per pair: one description of
//! each model, one difference listing and one compression into the final
//! instruction. [`TemplateCaptioner`] answers those calls from the pair's
//! edit records and is the default, deterministic backend.

mod dataset;
mod filter;
mod template;

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cad_seq::{serialize, CadModel};
use crate::geometry::{assemble, mesh, render_preview, CameraConfig, GeometryError};
use crate::variation::EditChain;

pub use dataset::{assemble_dataset, synthesize, Dataset, DatasetError, EditTriplet, Split, SynthConfig, TripletLine};
pub use filter::{filter_triplet, sentence_count, FilterConfig, FilterOutcome, RejectReason};
pub use template::{describe_model, TemplateCaptioner};

pub const DESCRIBE_VISUAL_PROMPT: &str = include_str!("../../prompts/v1/describe_visual.txt");
pub const DESCRIBE_SEQUENCE_PROMPT: &str = include_str!("../../prompts/v1/describe_sequence.txt");
pub const DIFFERENCES_PROMPT: &str = include_str!("../../prompts/v1/differences.txt");
pub const COMPRESS_PROMPT: &str = include_str!("../../prompts/v1/compress.txt");
pub const PROMPT_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaptionError {
    #[error("caption backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("backend returned an empty completion at step {0:?}")]
    EmptyCompletion(CaptionStep),
    #[error("template captioning needs the pair's edit records")]
    MissingRecord,
    #[error("edit records do not reproduce the edited model")]
    RecordMismatch,
    #[error("preview rendering failed: {0}")]
    Render(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Visual,
    Sequence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModalitySource {
    Visual,
    Sequence,
    Template,
}

impl ModalitySource {
    /// Value of the `source` field in dataset lines.
    pub fn dataset_label(self) -> &'static str {
        match self {
            ModalitySource::Visual => "lvlm-visual",
            ModalitySource::Sequence => "llm-sequence",
            ModalitySource::Template => "template",
        }
    }

    pub fn from_dataset_label(s: &str) -> Option<Self> {
        [ModalitySource::Visual, ModalitySource::Sequence, ModalitySource::Template]
            .into_iter()
            .find(|m| m.dataset_label() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaptionStep {
    DescribeOriginal,
    DescribeEdited,
    Differences,
    Compress,
}

/// Intermediate outputs of stepwise captioning.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaptionSteps {
    /// Original then edited.
    pub descriptions: [String; 2],
    pub raw_diff: String,
    pub compressed: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instruction {
    pub text: String,
    pub modality_source: ModalitySource,
    pub steps: Option<CaptionSteps>,
}

impl Instruction {
    pub fn plain(text: impl Into<String>, modality_source: ModalitySource) -> Self {
        Instruction { text: text.into(), modality_source, steps: None }
    }
}

/// Everything a backend may use besides the prompt. Remote backends only see the prompt.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    pub step: CaptionStep,
    pub orig: &'a CadModel,
    pub edit: &'a CadModel,
    pub chain: Option<&'a EditChain>,
}

/// Vision-language / language model used for captioning. All methods return plain text.
pub trait CaptionBackend: Send + Sync {
    /// `images` are PNG files.
    fn describe_image(&self, images: &[Vec<u8>], prompt: &str, ctx: &StepContext<'_>) -> Result<String, CaptionError>;
    fn describe_sequence(&self, text: &str, prompt: &str, ctx: &StepContext<'_>) -> Result<String, CaptionError>;
    fn complete(&self, prompt: &str, ctx: &StepContext<'_>) -> Result<String, CaptionError>;

    /// True for backends that caption from edit records rather than from the models.
    fn is_template(&self) -> bool {
        false
    }
}

/// Exponential backoff for [`CaptionError::BackendUnavailable`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay_ms: u64,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { max_retries: 3, base_delay_ms: 250 }
    }
}

impl RetryPolicy {
    pub const NONE: RetryPolicy = RetryPolicy { max_retries: 0, base_delay_ms: 0 };

    fn run(
        &self,
        step: CaptionStep,
        mut call: impl FnMut() -> Result<String, CaptionError>,
    ) -> Result<String, CaptionError> {
        let mut attempt = 0;
        loop {
            match call() {
                Ok(text) if text.trim().is_empty() => return Err(CaptionError::EmptyCompletion(step)),
                Ok(text) => return Ok(text.trim().to_string()),
                Err(CaptionError::BackendUnavailable(_)) if attempt < self.max_retries => {
                    thread::sleep(Duration::from_millis(self.base_delay_ms << attempt));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }
}

/// One (original, edited) pair to caption, with its edit records when known.
#[derive(Debug, Clone, Copy)]
pub struct CaptionRequest<'a> {
    pub orig: &'a CadModel,
    pub edit: &'a CadModel,
    pub chain: Option<&'a EditChain>,
}

fn preview_png(model: &CadModel) -> Result<Vec<u8>, CaptionError> {
    let assembly = assemble::<f64>(model)?;
    Ok(render_preview(&mesh(&assembly)?, &CameraConfig::default())?.to_png())
}

fn sequence_block(orig: &str, edit: &str) -> String {
    format!("\nOriginal CAD Operation Sequence:\n\n{orig}\n\nEdited CAD Operation Sequence:\n\n{edit}\n\n")
}

/// Describes both models, lists their differences and compresses them into an instruction.
pub fn stepwise_caption(
    req: CaptionRequest<'_>,
    backend: &dyn CaptionBackend,
    modality: Modality,
    retry: &RetryPolicy,
) -> Result<Instruction, CaptionError> {
    let ctx = |step| StepContext { step, orig: req.orig, edit: req.edit, chain: req.chain };
    let (orig_text, edit_text) = (serialize(req.orig), serialize(req.edit));

    let (desc_orig, desc_edit, raw_diff) = match modality {
        Modality::Visual => {
            let (img_orig, img_edit) = (preview_png(req.orig)?, preview_png(req.edit)?);
            let d0 = retry.run(CaptionStep::DescribeOriginal, || {
                backend.describe_image(
                    std::slice::from_ref(&img_orig),
                    DESCRIBE_VISUAL_PROMPT,
                    &ctx(CaptionStep::DescribeOriginal),
                )
            })?;
            let d1 = retry.run(CaptionStep::DescribeEdited, || {
                backend.describe_image(
                    std::slice::from_ref(&img_edit),
                    DESCRIBE_VISUAL_PROMPT,
                    &ctx(CaptionStep::DescribeEdited),
                )
            })?;
            let prompt = DIFFERENCES_PROMPT
                .replace("{sources}", " (the two images are attached in the same order)")
                .replace("{description_orig}", &d0)
                .replace("{description_edit}", &d1)
                .replace("{sequences}", "\n");
            let images = [img_orig.clone(), img_edit.clone()];
            let diff = retry.run(CaptionStep::Differences, || {
                backend.describe_image(&images, &prompt, &ctx(CaptionStep::Differences))
            })?;
            (d0, d1, diff)
        }
        Modality::Sequence => {
            let p0 = DESCRIBE_SEQUENCE_PROMPT.replace("{model}", &orig_text);
            let p1 = DESCRIBE_SEQUENCE_PROMPT.replace("{model}", &edit_text);
            let d0 = retry.run(CaptionStep::DescribeOriginal, || {
                backend.describe_sequence(&orig_text, &p0, &ctx(CaptionStep::DescribeOriginal))
            })?;
            let d1 = retry.run(CaptionStep::DescribeEdited, || {
                backend.describe_sequence(&edit_text, &p1, &ctx(CaptionStep::DescribeEdited))
            })?;
            let prompt = DIFFERENCES_PROMPT
                .replace("{sources}", "")
                .replace("{description_orig}", &d0)
                .replace("{description_edit}", &d1)
                .replace("{sequences}", &sequence_block(&orig_text, &edit_text));
            let diff =
                retry.run(CaptionStep::Differences, || backend.complete(&prompt, &ctx(CaptionStep::Differences)))?;
            (d0, d1, diff)
        }
    };

    let prompt = COMPRESS_PROMPT.replace("{differences}", &raw_diff);
    let compressed = retry.run(CaptionStep::Compress, || backend.complete(&prompt, &ctx(CaptionStep::Compress)))?;
    let modality_source = match (backend.is_template(), modality) {
        (true, _) => ModalitySource::Template,
        (false, Modality::Visual) => ModalitySource::Visual,
        (false, Modality::Sequence) => ModalitySource::Sequence,
    };
    Ok(Instruction {
        text: compressed.clone(),
        modality_source,
        steps: Some(CaptionSteps { descriptions: [desc_orig, desc_edit], raw_diff, compressed }),
    })
}
