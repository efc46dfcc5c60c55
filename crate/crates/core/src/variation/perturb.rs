use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cad_seq::{validate, BoolOp, CadModel, Curve, Loop, ValidationConfig};
use crate::geometry::is_renderable;

use super::generate::{extra_se, loop_bbox, shape_in_bbox};
use super::{EditKind, EditRecord, LoopPath, PrimitiveClass, VariationError};

/// Parameter jitters in quantized units.
pub const JITTERS: [i16; 6] = [-64, -32, -16, 16, 32, 64];

const MAX_ATTEMPTS: usize = 64;
const PROBE_POINTS: usize = 32;

fn jitter(rng: &mut ChaCha8Rng) -> i16 {
    *JITTERS.choose(rng).expect("non-empty")
}

fn shifted(v: u8, d: i16) -> Option<u8> {
    u8::try_from(i16::from(v) + d).ok()
}

fn structurally_applicable(model: &CadModel, kind: EditKind) -> bool {
    match kind {
        EditKind::AddSe => model.ses.len() < 3,
        EditKind::DeleteSe | EditKind::ChangeBoolOp => model.ses.len() >= 2,
        _ => !model.ses.is_empty(),
    }
}

fn random_loop_path(model: &CadModel, rng: &mut ChaCha8Rng) -> LoopPath {
    let paths: Vec<LoopPath> = model
        .ses
        .iter()
        .enumerate()
        .flat_map(|(se, s)| {
            s.sketch
                .faces
                .iter()
                .enumerate()
                .flat_map(move |(face, f)| (0..f.loops.len()).map(move |index| LoopPath { se, face, index }))
        })
        .collect();
    *paths.choose(rng).expect("valid models have loops")
}

fn loop_at(model: &CadModel, p: LoopPath) -> &Loop {
    &model.ses[p.se].sketch.faces[p.face].loops[p.index]
}

fn scale_loop(lp: &Loop, d: i16) -> Option<Loop> {
    if let [Curve::Circle { cx, cy, r }] = lp.curves[..] {
        let r = shifted(r, d / 2).filter(|&r| r >= 4)?;
        return Some(Loop::circle(cx, cy, r));
    }
    let (x0, y0, x1, y1) = loop_bbox(lp);
    let (cx, cy) = ((f64::from(x0) + f64::from(x1)) / 2.0, (f64::from(y0) + f64::from(y1)) / 2.0);
    let half = f64::from((x1 - x0).max(y1 - y0)) / 2.0;
    let new_half = half + f64::from(d) / 2.0;
    if new_half < 4.0 {
        return None;
    }
    let k = new_half / half;
    let map = |x: u8, y: u8| -> Option<(u8, u8)> {
        let nx = (cx + (f64::from(x) - cx) * k).round();
        let ny = (cy + (f64::from(y) - cy) * k).round();
        ((0.0..=255.0).contains(&nx) && (0.0..=255.0).contains(&ny)).then_some((nx as u8, ny as u8))
    };
    let curves = lp
        .curves
        .iter()
        .map(|c| match *c {
            Curve::Line { x, y } => map(x, y).map(|(x, y)| Curve::Line { x, y }),
            Curve::Arc { x, y, mid_x, mid_y } => {
                let (x, y) = map(x, y)?;
                let (mid_x, mid_y) = map(mid_x, mid_y)?;
                Some(Curve::Arc { x, y, mid_x, mid_y })
            }
            Curve::Circle { .. } => None,
        })
        .collect::<Option<Vec<_>>>()?;
    Some(Loop { curves })
}

fn propose(model: &CadModel, kind: EditKind, rng: &mut ChaCha8Rng) -> Option<EditRecord> {
    let n = model.ses.len();
    match kind {
        EditKind::AddSe => {
            let se = extra_se(rng, &model.ses[0])?;
            Some(EditRecord::AddSe { index: n, se })
        }
        EditKind::DeleteSe => {
            let index = rng.gen_range(1..n);
            Some(EditRecord::DeleteSe { index, se: model.ses[index].clone() })
        }
        EditKind::ReplacePrimitive => {
            let target = random_loop_path(model, rng);
            let old = loop_at(model, target).clone();
            let old_class = PrimitiveClass::of_loop(&old);
            let choices: Vec<PrimitiveClass> = PrimitiveClass::ALL.into_iter().filter(|c| *c != old_class).collect();
            let new = shape_in_bbox(*choices.choose(rng).expect("three classes remain"), loop_bbox(&old))?;
            Some(EditRecord::ReplacePrimitive { target, old, new })
        }
        EditKind::ScaleLoop => {
            let target = random_loop_path(model, rng);
            let old = loop_at(model, target).clone();
            let new = scale_loop(&old, jitter(rng))?;
            (new != old).then_some(EditRecord::ScaleLoop { target, old, new })
        }
        EditKind::TranslateSketch => {
            let se = rng.gen_range(0..n);
            let old = model.ses[se].extrusion.origin;
            let mut new = old;
            let axis = rng.gen_range(0..3);
            new[axis] = shifted(old[axis], jitter(rng))?;
            Some(EditRecord::TranslateSketch { se, old, new })
        }
        EditKind::ChangeExtrudeDist => {
            let se = rng.gen_range(0..n);
            let old = model.ses[se].extrusion.dist_pos;
            let new = shifted(old, jitter(rng)).filter(|&d| d != 128)?;
            Some(EditRecord::ChangeExtrudeDist { se, old, new })
        }
        EditKind::ChangeBoolOp => {
            let se = rng.gen_range(1..n);
            let old = model.ses[se].extrusion.op;
            let choices: Vec<BoolOp> =
                [BoolOp::Join, BoolOp::Cut, BoolOp::Intersect].into_iter().filter(|o| *o != old).collect();
            let new = *choices.choose(rng).expect("at least two remain");
            Some(EditRecord::ChangeBoolOp { se, old, new })
        }
    }
}

fn acceptable(model: &CadModel) -> bool {
    validate(model, &ValidationConfig::DATASET).is_valid && is_renderable::<f64>(model, PROBE_POINTS)
}

/// Seeded random edit of `model`. The result validates under the dataset
/// limits and assembles into a non-empty solid.
///
/// With `kind == None` each attempt draws uniformly among the structurally
/// applicable kinds.
pub fn perturb(model: &CadModel, seed: u64, kind: Option<EditKind>) -> Result<(CadModel, EditRecord), VariationError> {
    if !validate(model, &ValidationConfig::DATASET).is_valid {
        return Err(VariationError::InvalidModel);
    }
    let kinds: Vec<EditKind> = match kind {
        Some(k) => vec![k],
        None => EditKind::ALL.into_iter().collect(),
    };
    let kinds: Vec<EditKind> = kinds.into_iter().filter(|k| structurally_applicable(model, *k)).collect();
    let label = kind.map_or_else(|| "any".to_string(), |k| k.to_string());
    if kinds.is_empty() {
        return Err(VariationError::NoApplicableEdit(label));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_ATTEMPTS {
        let k = *kinds.choose(&mut rng).expect("non-empty");
        let Some(record) = propose(model, k, &mut rng) else { continue };
        let edited = record.apply(model)?;
        if edited != *model && acceptable(&edited) {
            return Ok((edited, record));
        }
    }
    Err(VariationError::NoApplicableEdit(label))
}

/// A base model C_0 and its variants C_1..C_K, each with the record producing it from the base.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantSet {
    pub base: CadModel,
    pub variants: Vec<(CadModel, EditRecord)>,
}

impl VariantSet {
    /// Up to `k` distinct variants of `base`, each different from the base.
    pub fn generate(base: CadModel, k: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut variants: Vec<(CadModel, EditRecord)> = Vec::with_capacity(k);
        for _ in 0..4 * k {
            if variants.len() == k {
                break;
            }
            if let Ok((m, r)) = perturb(&base, rng.gen(), None) {
                if variants.iter().all(|(v, _)| *v != m) {
                    variants.push((m, r));
                }
            }
        }
        VariantSet { base, variants }
    }
}
