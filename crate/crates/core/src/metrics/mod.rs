//! Evaluation metrics: valid ratio, occupancy Jensen-Shannon divergence,
//! Chamfer distance and directional CLIP score, plus the batch evaluator.

mod chamfer;
mod evaluate;
mod jsd;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cad_seq::parse;
use crate::geometry::{assemble, sample_point_cloud, SampleConfig};

pub use chamfer::{chamfer, KdTree};
pub use evaluate::{evaluate, Counts, EvalConfig, MetricsReport};
pub use jsd::{jsd, jsd_distributions, OccupancyHistogram, DEFAULT_RESOLUTION};

/// Text paired with every instruction when measuring the text-embedding delta.
pub const NEUTRAL_TEXT: &str = "This is a 3D shape.";

const ZERO_DELTA_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("expected {expected} candidates, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("result {index} does not belong to test example {index}")]
    Misaligned { index: usize },
    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("embedding contains a non-finite value")]
    NonFinite,
    #[error("image or text embedding did not change")]
    ZeroDelta,
    #[error("embedding backend failed: {0}")]
    Backend(String),
}

/// A candidate is valid when it parses and its solid yields surface samples.
pub fn is_valid_candidate(text: &str, sample: &SampleConfig) -> bool {
    parse(text).ok().and_then(|m| assemble::<f64>(&m).ok()).is_some_and(|a| sample_point_cloud(&a, sample).is_ok())
}

/// Fraction of texts that parse and render into a non-empty solid.
pub fn valid_ratio(texts: &[String]) -> Result<f64, MetricsError> {
    if texts.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let sample = SampleConfig::default();
    let valid = texts.iter().filter(|t| is_valid_candidate(t, &sample)).count();
    Ok(valid as f64 / texts.len() as f64)
}

/// Embeddings of the original/edited renders and of the neutral/edit texts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DClipInputs {
    pub e_img_orig: Vec<f64>,
    pub e_img_edit: Vec<f64>,
    pub e_txt_orig: Vec<f64>,
    pub e_txt_edit: Vec<f64>,
}

fn delta(a: &[f64], b: &[f64]) -> Vec<f64> {
    b.iter().zip(a).map(|(y, x)| y - x).collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Cosine between the image-embedding delta and the text-embedding delta.
pub fn dclip(x: &DClipInputs) -> Result<f64, MetricsError> {
    let dim = x.e_img_orig.len();
    for v in [&x.e_img_edit, &x.e_txt_orig, &x.e_txt_edit] {
        if v.len() != dim {
            return Err(MetricsError::DimensionMismatch { left: dim, right: v.len() });
        }
    }
    if [&x.e_img_orig, &x.e_img_edit, &x.e_txt_orig, &x.e_txt_edit].iter().any(|v| v.iter().any(|c| !c.is_finite())) {
        return Err(MetricsError::NonFinite);
    }
    let di = delta(&x.e_img_orig, &x.e_img_edit);
    let dt = delta(&x.e_txt_orig, &x.e_txt_edit);
    let (ni, nt) = (norm(&di), norm(&dt));
    if ni <= ZERO_DELTA_EPS || nt <= ZERO_DELTA_EPS {
        return Err(MetricsError::ZeroDelta);
    }
    let dot: f64 = di.iter().zip(&dt).map(|(a, b)| a * b).sum();
    Ok((dot / (ni * nt)).clamp(-1.0, 1.0))
}

/// Joint image/text embedding model.
pub trait EmbeddingBackend: Send + Sync {
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, MetricsError>;
    /// `images` are PNG files.
    fn embed_images(&self, images: &[Vec<u8>]) -> Result<Vec<Vec<f64>>, MetricsError>;
}

/// Text paired with an instruction for the edited side of the text delta.
pub fn edit_text(instruction: &str) -> String {
    format!("{NEUTRAL_TEXT} {instruction}")
}
