use std::collections::HashMap;

use crate::captioning::EditTriplet;

use super::{build_infilling_prompt, build_locating_prompt, ModelBackend, PipelineError, SamplingConfig};

/// Deterministic backend answering exact prompts from a table.
///
/// A prompt with responses `r` answers `r[seed % r.len()]`, so candidate `i`
/// of an edit gets the `i`-th scripted response.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    responses: HashMap<String, Vec<String>>,
}

impl ScriptedBackend {
    pub fn insert(&mut self, prompt: String, responses: Vec<String>) {
        self.responses.insert(prompt, responses);
    }

    /// Scripts the ground-truth mask for each locating prompt and the
    /// ground-truth edit for each infilling prompt.
    pub fn from_triplets<'a>(triplets: impl IntoIterator<Item = &'a EditTriplet>) -> Self {
        let mut b = ScriptedBackend::default();
        for t in triplets {
            let (orig, instr, mask) = (&t.orig_text, &t.instruction.text, t.gt_mask.text());
            if let Ok(p) = build_locating_prompt(orig, instr) {
                b.insert(p, vec![mask.clone()]);
            }
            if let Ok(p) = build_infilling_prompt(orig, instr, &mask) {
                b.insert(p, vec![t.edit_text.clone()]);
            }
        }
        b
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl ModelBackend for ScriptedBackend {
    fn complete(&self, prompt: &str, sampling: &SamplingConfig) -> Result<String, PipelineError> {
        let options = self
            .responses
            .get(prompt)
            .filter(|r| !r.is_empty())
            .ok_or_else(|| PipelineError::BackendUnavailable("no scripted response for this prompt".into()))?;
        let i = (sampling.seed.unwrap_or(0) % options.len() as u64) as usize;
        Ok(options[i].clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::captioning::{Instruction, ModalitySource};

    #[test]
    fn scripted_from_triplet() {
        let orig = "sketch face loop line 192 64 line 192 192 line 64 192 line 64 64 extrude theta 0 phi 128 gamma 128 origin 128 128 128 scale 128 dist 160 128 op new ext one <eom>";
        let edit = orig.replace("dist 160", "dist 200");
        let t = EditTriplet::new(
            Instruction::plain("Increase the extrusion height of the block.", ModalitySource::Template),
            orig.into(),
            edit.clone(),
            None,
        );
        let b = ScriptedBackend::from_triplets([&t]);
        assert_eq!(b.len(), 2);
        let s = SamplingConfig::default();
        let p = build_locating_prompt(orig, &t.instruction.text).unwrap();
        assert_eq!(b.complete(&p, &s).unwrap(), t.gt_mask.text());
        let p = build_infilling_prompt(orig, &t.instruction.text, &t.gt_mask.text()).unwrap();
        assert_eq!(b.complete(&p, &s.with_seed_offset(3)).unwrap(), edit);
        assert!(b.complete("other", &s).is_err());
    }
}
