use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cad_seq::{parse, serialize, tokenize};
use crate::masking::{make_gt_mask, MaskedSequence};
use crate::variation::{make_pairs, random_model, EditChain, PairStrategy, VariantSet};

use super::{
    filter_triplet, stepwise_caption, CaptionBackend, CaptionError, CaptionRequest, FilterConfig, Instruction,
    Modality, ModalitySource, RejectReason, RetryPolicy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// (instruction, original, edited) with the ground-truth mask and provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditTriplet {
    pub instruction: Instruction,
    pub orig_text: String,
    pub edit_text: String,
    pub gt_mask: MaskedSequence,
    pub record: Option<EditChain>,
    pub split: Split,
}

impl EditTriplet {
    /// Triplet with the mask computed from the two texts; split defaults to train.
    pub fn new(instruction: Instruction, orig_text: String, edit_text: String, record: Option<EditChain>) -> Self {
        let gt_mask = make_gt_mask(&tokenize(&orig_text), &tokenize(&edit_text));
        EditTriplet { instruction, orig_text, edit_text, gt_mask, record, split: Split::Train }
    }

    fn key(&self) -> (&str, &str, &str) {
        (&self.orig_text, &self.instruction.text, &self.edit_text)
    }
}

/// One JSONL line of a triplet dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TripletLine {
    pub instruction: String,
    pub orig: String,
    pub edit: String,
    pub mask: String,
    pub record: Option<EditChain>,
    pub split: Split,
    pub source: String,
}

impl From<&EditTriplet> for TripletLine {
    fn from(t: &EditTriplet) -> Self {
        TripletLine {
            instruction: t.instruction.text.clone(),
            orig: t.orig_text.clone(),
            edit: t.edit_text.clone(),
            mask: t.gt_mask.text(),
            record: t.record.clone(),
            split: t.split,
            source: t.instruction.modality_source.dataset_label().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("triplet {index} duplicates an earlier one")]
    DuplicateTriplet { index: usize },
    #[error("triplet {index} does not pass the filter: {reason:?}")]
    Rejected { index: usize, reason: RejectReason },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: {field} does not parse: {message}")]
    Parse { line: usize, field: &'static str, message: String },
    #[error("line {line}: mask differs from the one recomputed from orig and edit")]
    MaskMismatch { line: usize },
    #[error("line {line}: unknown source {source_label:?}")]
    UnknownSource { line: usize, source_label: String },
    #[error(transparent)]
    Caption(#[from] CaptionError),
    #[error("only {produced} of {requested} triplets could be synthesized")]
    Exhausted { produced: usize, requested: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pub triplets: Vec<EditTriplet>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &EditTriplet> {
        self.triplets.iter().filter(move |t| t.split == split)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for t in &self.triplets {
            out.push_str(&serde_json::to_string(&TripletLine::from(t)).expect("triplet lines serialize"));
            out.push('\n');
        }
        out
    }

    /// Parses a JSONL dataset, checking both texts parse and the stored mask matches recomputation.
    pub fn from_jsonl(text: &str) -> Result<Dataset, DatasetError> {
        let mut triplets = Vec::new();
        for (i, raw) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let line = i + 1;
            let tl: TripletLine =
                serde_json::from_str(raw).map_err(|e| DatasetError::Json { line, message: e.to_string() })?;
            for (field, value) in [("orig", &tl.orig), ("edit", &tl.edit)] {
                parse(value).map_err(|e| DatasetError::Parse { line, field, message: e.to_string() })?;
            }
            let source = ModalitySource::from_dataset_label(&tl.source)
                .ok_or_else(|| DatasetError::UnknownSource { line, source_label: tl.source.clone() })?;
            let mut t = EditTriplet::new(Instruction::plain(tl.instruction, source), tl.orig, tl.edit, tl.record);
            if t.gt_mask != MaskedSequence::parse(&tl.mask) {
                return Err(DatasetError::MaskMismatch { line });
            }
            t.split = tl.split;
            triplets.push(t);
        }
        Ok(Dataset { triplets })
    }
}

fn split_key(t: &EditTriplet) -> ([u8; 32], [u8; 32]) {
    let primary = Sha256::digest(t.orig_text.as_bytes()).into();
    let mut h = Sha256::new();
    for part in [&t.orig_text, &t.instruction.text, &t.edit_text] {
        h.update(part.as_bytes());
        h.update([0u8]);
    }
    (primary, h.finalize().into())
}

/// Assigns splits and checks uniqueness, keeping input order.
///
/// Triplets are ranked by the SHA-256 of their original text (ties broken by a
/// hash of the whole triplet); the first `round(0.9 N)` go to train, the next
/// `round(0.05 N)` to val and the rest to test.
pub fn assemble_dataset(triplets: Vec<EditTriplet>, cfg: &FilterConfig) -> Result<Dataset, DatasetError> {
    let mut seen = HashSet::new();
    for (index, t) in triplets.iter().enumerate() {
        if let Some(reason) = filter_triplet(t, cfg).reason {
            return Err(DatasetError::Rejected { index, reason });
        }
        if !seen.insert(t.key()) {
            return Err(DatasetError::DuplicateTriplet { index });
        }
    }
    let n = triplets.len();
    let n_train = (0.9 * n as f64).round() as usize;
    let n_val = ((0.05 * n as f64).round() as usize).min(n - n_train);
    let mut order: Vec<usize> = (0..n).collect();
    let keys: Vec<_> = triplets.iter().map(split_key).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
    let mut triplets = triplets;
    for (rank, &i) in order.iter().enumerate() {
        triplets[i].split = if rank < n_train {
            Split::Train
        } else if rank < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
    }
    Ok(Dataset { triplets })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub seed: u64,
    /// Variants K generated per base model.
    pub variants_per_base: usize,
    pub modality: Modality,
    pub filter: FilterConfig,
    pub retry: RetryPolicy,
}

impl SynthConfig {
    pub fn new(count: usize, seed: u64) -> Self {
        SynthConfig {
            count,
            seed,
            variants_per_base: 3,
            modality: Modality::Sequence,
            filter: FilterConfig::default(),
            retry: RetryPolicy::default(),
        }
    }
}

/// Generates `cfg.count` filtered, unique triplets.
///
/// Base models rotate through the three pairing strategies; pairs whose edit
/// chain cancels out are skipped, as are pairs whose original and instruction
/// already appear: such an instruction would not determine its edit. Output is a pure function of the config and
/// the backend's answers.
pub fn synthesize(cfg: &SynthConfig, backend: &dyn CaptionBackend) -> Result<Dataset, DatasetError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut seen: HashSet<(String, String)> = HashSet::new();
    let mut accepted = Vec::with_capacity(cfg.count);
    let max_bases = 20 * cfg.count + 100;
    for base_index in 0..max_bases {
        if accepted.len() == cfg.count {
            break;
        }
        let base = random_model(rng.gen());
        let vset = VariantSet::generate(base, cfg.variants_per_base, rng.gen());
        let strategy = PairStrategy::ALL[base_index % PairStrategy::ALL.len()];
        let pairs =
            make_pairs(&vset, strategy).or_else(|_| make_pairs(&vset, PairStrategy::BaseToVariant)).unwrap_or_default();
        for pair in pairs {
            if accepted.len() == cfg.count {
                break;
            }
            if pair.chain.is_empty() || pair.orig == pair.edit {
                continue;
            }
            let req = CaptionRequest { orig: &pair.orig, edit: &pair.edit, chain: Some(&pair.chain) };
            let instruction = stepwise_caption(req, backend, cfg.modality, &cfg.retry)?;
            let t = EditTriplet::new(instruction, serialize(&pair.orig), serialize(&pair.edit), Some(pair.chain));
            if !filter_triplet(&t, &cfg.filter).accept {
                continue;
            }
            let key = (t.orig_text.clone(), t.instruction.text.clone());
            if seen.insert(key) {
                accepted.push(t);
            }
        }
    }
    if accepted.len() < cfg.count {
        return Err(DatasetError::Exhausted { produced: accepted.len(), requested: cfg.count });
    }
    assemble_dataset(accepted, &cfg.filter)
}
