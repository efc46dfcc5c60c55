use serde::{Deserialize, Serialize};

use super::EditTriplet;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterConfig {
    /// Maximum number of sentences in an instruction.
    pub max_instructions: usize,
    pub max_masks: usize,
    /// Lower-case phrases marking a pair without meaningful change.
    pub noop_phrases: Vec<String>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            max_instructions: 3,
            max_masks: 5,
            noop_phrases: [
                "no transformation is needed",
                "no transformation needed",
                "no changes are needed",
                "no change is needed",
            ]
            .map(String::from)
            .to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooManyInstructions,
    TooManyMasks,
    NoOp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub accept: bool,
    pub reason: Option<RejectReason>,
}

impl FilterOutcome {
    const ACCEPT: FilterOutcome = FilterOutcome { accept: true, reason: None };

    fn reject(reason: RejectReason) -> Self {
        FilterOutcome { accept: false, reason: Some(reason) }
    }
}

/// Non-blank pieces between `.`, `!` and `?`.
pub fn sentence_count(text: &str) -> usize {
    text.split(['.', '!', '?']).filter(|s| !s.trim().is_empty()).count()
}

pub fn filter_triplet(t: &EditTriplet, cfg: &FilterConfig) -> FilterOutcome {
    let text = t.instruction.text.to_lowercase();
    if cfg.noop_phrases.iter().any(|p| text.contains(p.as_str())) {
        return FilterOutcome::reject(RejectReason::NoOp);
    }
    if sentence_count(&text) > cfg.max_instructions {
        return FilterOutcome::reject(RejectReason::TooManyInstructions);
    }
    if t.gt_mask.mask_count() > cfg.max_masks {
        return FilterOutcome::reject(RejectReason::TooManyMasks);
    }
    FilterOutcome::ACCEPT
}
