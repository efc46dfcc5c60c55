//! Rule-based design variation.
//!
//! Perturbations are structural edits of a [`CadModel`] described by an
//! [`EditRecord`]. Every record can be re-applied to the original and
//! inverted, so each generated pair carries an exact, machine-readable diff.

mod generate;
mod perturb;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cad_seq::{BoolOp, CadModel, Curve, Loop, SePair};

pub use generate::{extra_se, loop_bbox, random_model, shape_in_bbox, QBox};
pub use perturb::{perturb, VariantSet, JITTERS};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VariationError {
    #[error("no applicable {0} edit for this model")]
    NoApplicableEdit(String),
    #[error("pairing strategy needs {needed} variants, got {got}")]
    NotEnoughVariants { needed: usize, got: usize },
    #[error("input model is invalid")]
    InvalidModel,
    #[error("edit record does not match the model: {0}")]
    RecordMismatch(String),
}

/// Noun used for an SE pair's shape in instructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrimitiveClass {
    Cylinder,
    Block,
    Prism,
    RoundedPrism,
}

impl PrimitiveClass {
    pub const ALL: [PrimitiveClass; 4] =
        [PrimitiveClass::Cylinder, PrimitiveClass::Block, PrimitiveClass::Prism, PrimitiveClass::RoundedPrism];

    pub fn noun(self) -> &'static str {
        match self {
            PrimitiveClass::Cylinder => "cylinder",
            PrimitiveClass::Block => "block",
            PrimitiveClass::Prism => "prism",
            PrimitiveClass::RoundedPrism => "rounded prism",
        }
    }

    /// Circle loops are cylinders, axis-aligned four-line loops are blocks,
    /// loops with arcs are rounded prisms and other polygons are prisms.
    pub fn of_loop(lp: &Loop) -> Self {
        if lp.is_circle() {
            return PrimitiveClass::Cylinder;
        }
        if lp.curves.iter().any(|c| matches!(c, Curve::Arc { .. })) {
            return PrimitiveClass::RoundedPrism;
        }
        let v = lp.vertices();
        let axis_aligned = v.len() == 4
            && (0..4).all(|i| {
                let (a, b) = (v[i], v[(i + 1) % 4]);
                (a.0 == b.0) != (a.1 == b.1)
            });
        if axis_aligned {
            PrimitiveClass::Block
        } else {
            PrimitiveClass::Prism
        }
    }

    /// Class of an SE pair, from its first outer loop.
    pub fn of_se(se: &SePair) -> Self {
        se.outer_loop().map(Self::of_loop).unwrap_or(PrimitiveClass::Prism)
    }
}

impl fmt::Display for PrimitiveClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.noun())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    AddSe,
    DeleteSe,
    ReplacePrimitive,
    ScaleLoop,
    TranslateSketch,
    ChangeExtrudeDist,
    ChangeBoolOp,
}

impl EditKind {
    pub const ALL: [EditKind; 7] = [
        EditKind::AddSe,
        EditKind::DeleteSe,
        EditKind::ReplacePrimitive,
        EditKind::ScaleLoop,
        EditKind::TranslateSketch,
        EditKind::ChangeExtrudeDist,
        EditKind::ChangeBoolOp,
    ];

    pub fn literal(self) -> &'static str {
        match self {
            EditKind::AddSe => "add_se",
            EditKind::DeleteSe => "delete_se",
            EditKind::ReplacePrimitive => "replace_primitive",
            EditKind::ScaleLoop => "scale_loop",
            EditKind::TranslateSketch => "translate_sketch",
            EditKind::ChangeExtrudeDist => "change_extrude_dist",
            EditKind::ChangeBoolOp => "change_bool_op",
        }
    }

    pub fn from_literal(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.literal() == s)
    }
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.literal())
    }
}

/// Address of one loop: `ses[se].sketch.faces[face].loops[index]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LoopPath {
    pub se: usize,
    pub face: usize,
    #[serde(rename = "loop")]
    pub index: usize,
}

impl fmt::Display for LoopPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ses[{}].sketch.faces[{}].loops[{}]", self.se, self.face, self.index)
    }
}

/// One structural edit with the values it replaces, so it can be checked and inverted.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EditRecord {
    AddSe { index: usize, se: SePair },
    DeleteSe { index: usize, se: SePair },
    ReplacePrimitive { target: LoopPath, old: Loop, new: Loop },
    ScaleLoop { target: LoopPath, old: Loop, new: Loop },
    TranslateSketch { se: usize, old: [u8; 3], new: [u8; 3] },
    ChangeExtrudeDist { se: usize, old: u8, new: u8 },
    ChangeBoolOp { se: usize, old: BoolOp, new: BoolOp },
}

impl EditRecord {
    pub fn kind(&self) -> EditKind {
        match self {
            EditRecord::AddSe { .. } => EditKind::AddSe,
            EditRecord::DeleteSe { .. } => EditKind::DeleteSe,
            EditRecord::ReplacePrimitive { .. } => EditKind::ReplacePrimitive,
            EditRecord::ScaleLoop { .. } => EditKind::ScaleLoop,
            EditRecord::TranslateSketch { .. } => EditKind::TranslateSketch,
            EditRecord::ChangeExtrudeDist { .. } => EditKind::ChangeExtrudeDist,
            EditRecord::ChangeBoolOp { .. } => EditKind::ChangeBoolOp,
        }
    }

    /// Path of the edited element in the model the record applies to.
    pub fn target_path(&self) -> String {
        match self {
            EditRecord::AddSe { index, .. } | EditRecord::DeleteSe { index, .. } => format!("ses[{index}]"),
            EditRecord::ReplacePrimitive { target, .. } | EditRecord::ScaleLoop { target, .. } => target.to_string(),
            EditRecord::TranslateSketch { se, .. } => format!("ses[{se}].extrusion.origin"),
            EditRecord::ChangeExtrudeDist { se, .. } => format!("ses[{se}].extrusion.dist_pos"),
            EditRecord::ChangeBoolOp { se, .. } => format!("ses[{se}].extrusion.op"),
        }
    }

    /// Class of the primitive the edit is about, read from the model before the edit.
    pub fn primitive_class(&self, before: &CadModel) -> PrimitiveClass {
        let se_class = |i: usize| before.ses.get(i).map(PrimitiveClass::of_se).unwrap_or(PrimitiveClass::Prism);
        match self {
            EditRecord::AddSe { se, .. } | EditRecord::DeleteSe { se, .. } => PrimitiveClass::of_se(se),
            EditRecord::ReplacePrimitive { old, .. } | EditRecord::ScaleLoop { old, .. } => {
                PrimitiveClass::of_loop(old)
            }
            EditRecord::TranslateSketch { se, .. }
            | EditRecord::ChangeExtrudeDist { se, .. }
            | EditRecord::ChangeBoolOp { se, .. } => se_class(*se),
        }
    }

    /// Applies the edit after checking that the model holds the recorded old values.
    pub fn apply(&self, model: &CadModel) -> Result<CadModel, VariationError> {
        let mismatch = |what: &str| VariationError::RecordMismatch(format!("{} at {}", what, self.target_path()));
        let mut out = model.clone();
        match self {
            EditRecord::AddSe { index, se } => {
                if *index > out.ses.len() {
                    return Err(mismatch("index out of range"));
                }
                out.ses.insert(*index, se.clone());
            }
            EditRecord::DeleteSe { index, se } => {
                if out.ses.get(*index) != Some(se) {
                    return Err(mismatch("SE pair differs"));
                }
                out.ses.remove(*index);
            }
            EditRecord::ReplacePrimitive { target, old, new } | EditRecord::ScaleLoop { target, old, new } => {
                let lp = out
                    .ses
                    .get_mut(target.se)
                    .and_then(|s| s.sketch.faces.get_mut(target.face))
                    .and_then(|f| f.loops.get_mut(target.index))
                    .ok_or_else(|| mismatch("no such loop"))?;
                if lp != old {
                    return Err(mismatch("loop differs"));
                }
                *lp = new.clone();
            }
            EditRecord::TranslateSketch { se, old, new } => {
                let e = &mut out.ses.get_mut(*se).ok_or_else(|| mismatch("no such SE pair"))?.extrusion;
                if e.origin != *old {
                    return Err(mismatch("origin differs"));
                }
                e.origin = *new;
            }
            EditRecord::ChangeExtrudeDist { se, old, new } => {
                let e = &mut out.ses.get_mut(*se).ok_or_else(|| mismatch("no such SE pair"))?.extrusion;
                if e.dist_pos != *old {
                    return Err(mismatch("distance differs"));
                }
                e.dist_pos = *new;
            }
            EditRecord::ChangeBoolOp { se, old, new } => {
                let e = &mut out.ses.get_mut(*se).ok_or_else(|| mismatch("no such SE pair"))?.extrusion;
                if e.op != *old {
                    return Err(mismatch("operation differs"));
                }
                e.op = *new;
            }
        }
        Ok(out)
    }

    /// Edit that undoes `self`: additions and deletions swap, other kinds swap old and new.
    pub fn inverse(&self) -> EditRecord {
        match self.clone() {
            EditRecord::AddSe { index, se } => EditRecord::DeleteSe { index, se },
            EditRecord::DeleteSe { index, se } => EditRecord::AddSe { index, se },
            EditRecord::ReplacePrimitive { target, old, new } => {
                EditRecord::ReplacePrimitive { target, old: new, new: old }
            }
            EditRecord::ScaleLoop { target, old, new } => EditRecord::ScaleLoop { target, old: new, new: old },
            EditRecord::TranslateSketch { se, old, new } => EditRecord::TranslateSketch { se, old: new, new: old },
            EditRecord::ChangeExtrudeDist { se, old, new } => EditRecord::ChangeExtrudeDist { se, old: new, new: old },
            EditRecord::ChangeBoolOp { se, old, new } => EditRecord::ChangeBoolOp { se, old: new, new: old },
        }
    }

    /// Single record equivalent to `self` followed by `next`, when both set the same field.
    /// `Some(None)` means the two cancel out.
    fn merge(&self, next: &EditRecord) -> Option<Option<EditRecord>> {
        let merged = match (self, next) {
            (
                EditRecord::ReplacePrimitive { target: t1, old, .. } | EditRecord::ScaleLoop { target: t1, old, .. },
                EditRecord::ReplacePrimitive { target: t2, new, .. } | EditRecord::ScaleLoop { target: t2, new, .. },
            ) if t1 == t2 => {
                let (old_class, new_class) = (PrimitiveClass::of_loop(old), PrimitiveClass::of_loop(new));
                let (target, old, new) = (*t1, old.clone(), new.clone());
                if old_class == new_class {
                    EditRecord::ScaleLoop { target, old, new }
                } else {
                    EditRecord::ReplacePrimitive { target, old, new }
                }
            }
            (EditRecord::TranslateSketch { se: a, old, .. }, EditRecord::TranslateSketch { se: b, new, .. })
                if a == b =>
            {
                EditRecord::TranslateSketch { se: *a, old: *old, new: *new }
            }
            (EditRecord::ChangeExtrudeDist { se: a, old, .. }, EditRecord::ChangeExtrudeDist { se: b, new, .. })
                if a == b =>
            {
                EditRecord::ChangeExtrudeDist { se: *a, old: *old, new: *new }
            }
            (EditRecord::ChangeBoolOp { se: a, old, .. }, EditRecord::ChangeBoolOp { se: b, new, .. }) if a == b => {
                EditRecord::ChangeBoolOp { se: *a, old: *old, new: *new }
            }
            _ => return None,
        };
        Some((!merged.is_identity()).then_some(merged))
    }

    fn is_identity(&self) -> bool {
        match self {
            EditRecord::AddSe { .. } | EditRecord::DeleteSe { .. } => false,
            EditRecord::ReplacePrimitive { old, new, .. } | EditRecord::ScaleLoop { old, new, .. } => old == new,
            EditRecord::TranslateSketch { old, new, .. } => old == new,
            EditRecord::ChangeExtrudeDist { old, new, .. } => old == new,
            EditRecord::ChangeBoolOp { old, new, .. } => old == new,
        }
    }
}

/// Ordered edits applied one after another.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EditChain {
    pub edits: Vec<EditRecord>,
}

impl EditChain {
    pub fn single(record: EditRecord) -> Self {
        EditChain { edits: vec![record] }
    }

    /// Concatenation of two chains, merging adjacent edits of the same field.
    pub fn compose(first: &EditChain, second: &EditChain) -> Self {
        let mut edits: Vec<EditRecord> = first.edits.clone();
        for r in &second.edits {
            match edits.last().and_then(|last| last.merge(r)) {
                Some(merged) => {
                    edits.pop();
                    edits.extend(merged);
                }
                None => edits.push(r.clone()),
            }
        }
        EditChain { edits }
    }

    pub fn apply(&self, model: &CadModel) -> Result<CadModel, VariationError> {
        self.edits.iter().try_fold(model.clone(), |m, r| r.apply(&m))
    }

    pub fn inverse(&self) -> EditChain {
        EditChain { edits: self.edits.iter().rev().map(EditRecord::inverse).collect() }
    }

    /// Each edit paired with the model it applies to.
    pub fn steps(&self, model: &CadModel) -> Result<Vec<(EditRecord, CadModel)>, VariationError> {
        let mut cur = model.clone();
        let mut out = Vec::with_capacity(self.edits.len());
        for r in &self.edits {
            let next = r.apply(&cur)?;
            out.push((r.clone(), std::mem::replace(&mut cur, next)));
        }
        Ok(out)
    }

    pub fn is_empty(&self) -> bool {
        self.edits.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairStrategy {
    BaseToVariant,
    VariantToBase,
    VariantToVariant,
}

impl PairStrategy {
    pub const ALL: [PairStrategy; 3] =
        [PairStrategy::BaseToVariant, PairStrategy::VariantToBase, PairStrategy::VariantToVariant];
}

/// An (original, edited) pair with the edits that turn one into the other.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditPair {
    pub orig: CadModel,
    pub edit: CadModel,
    pub chain: EditChain,
}

/// Pairs a variant set under one of the three strategies.
pub fn make_pairs(vset: &VariantSet, strategy: PairStrategy) -> Result<Vec<EditPair>, VariationError> {
    let k = vset.variants.len();
    let needed = if strategy == PairStrategy::VariantToVariant { 2 } else { 1 };
    if k < needed {
        return Err(VariationError::NotEnoughVariants { needed, got: k });
    }
    let pairs = match strategy {
        PairStrategy::BaseToVariant => vset
            .variants
            .iter()
            .map(|(m, r)| EditPair { orig: vset.base.clone(), edit: m.clone(), chain: EditChain::single(r.clone()) })
            .collect(),
        PairStrategy::VariantToBase => vset
            .variants
            .iter()
            .map(|(m, r)| EditPair { orig: m.clone(), edit: vset.base.clone(), chain: EditChain::single(r.inverse()) })
            .collect(),
        PairStrategy::VariantToVariant => {
            let mut out = Vec::with_capacity(k * (k - 1));
            for (i, (mi, ri)) in vset.variants.iter().enumerate() {
                for (j, (mj, rj)) in vset.variants.iter().enumerate() {
                    if i != j {
                        let chain =
                            EditChain::compose(&EditChain::single(ri.inverse()), &EditChain::single(rj.clone()));
                        out.push(EditPair { orig: mi.clone(), edit: mj.clone(), chain });
                    }
                }
            }
            out
        }
    };
    Ok(pairs)
}

/// Pluggable variation source producing an edited model from a seed.
pub trait VariationModel: Send + Sync {
    fn vary(&self, model: &CadModel, seed: u64) -> Result<CadModel, VariationError>;
}

/// The built-in perturber behind [`VariationModel`].
#[derive(Debug, Clone, Copy, Default)]
pub struct RuleBasedVariation;

impl VariationModel for RuleBasedVariation {
    fn vary(&self, model: &CadModel, seed: u64) -> Result<CadModel, VariationError> {
        perturb(model, seed, None).map(|(m, _)| m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cad_seq::{serialize, Extrusion};

    fn two_se() -> CadModel {
        CadModel {
            ses: vec![
                SePair::simple(Loop::rectangle(64, 64, 192, 192), Extrusion { dist_pos: 192, ..Extrusion::default() }),
                SePair::simple(
                    Loop::circle(128, 128, 24),
                    Extrusion { dist_pos: 200, op: BoolOp::Cut, ..Extrusion::default() },
                ),
            ],
        }
    }

    #[test]
    fn classes() {
        assert_eq!(PrimitiveClass::of_loop(&Loop::circle(1, 2, 3)), PrimitiveClass::Cylinder);
        assert_eq!(PrimitiveClass::of_loop(&Loop::rectangle(0, 0, 9, 9)), PrimitiveClass::Block);
        assert_eq!(PrimitiveClass::of_loop(&Loop::polygon(&[(0, 0), (9, 0), (0, 9)])), PrimitiveClass::Prism);
        assert_eq!(PrimitiveClass::of_loop(&Loop::polygon(&[(0, 0), (9, 1), (9, 9), (0, 9)])), PrimitiveClass::Prism);
    }

    #[test]
    fn apply_and_inverse_round_trip() {
        let m = two_se();
        let records = [
            EditRecord::DeleteSe { index: 1, se: m.ses[1].clone() },
            EditRecord::ChangeExtrudeDist { se: 0, old: 192, new: 208 },
            EditRecord::ChangeBoolOp { se: 1, old: BoolOp::Cut, new: BoolOp::Join },
            EditRecord::TranslateSketch { se: 0, old: [128; 3], new: [160, 128, 128] },
            EditRecord::ScaleLoop {
                target: LoopPath { se: 1, face: 0, index: 0 },
                old: Loop::circle(128, 128, 24),
                new: Loop::circle(128, 128, 40),
            },
        ];
        for r in records {
            let edited = r.apply(&m).unwrap();
            assert_ne!(edited, m);
            assert_eq!(r.inverse().apply(&edited).unwrap(), m, "{r:?}");
            assert_eq!(r.inverse().inverse(), r);
        }
    }

    #[test]
    fn delete_record_targets_se() {
        let m = two_se();
        let r = EditRecord::DeleteSe { index: 1, se: m.ses[1].clone() };
        assert_eq!(r.target_path(), "ses[1]");
        assert_eq!(r.apply(&m).unwrap().ses.len(), 1);
        assert_eq!(r.primitive_class(&m), PrimitiveClass::Cylinder);
    }

    #[test]
    fn square_extrude_distance_change() {
        let m = CadModel { ses: vec![SePair::simple(Loop::rectangle(64, 64, 192, 192), Extrusion::default())] };
        let r = EditRecord::ChangeExtrudeDist { se: 0, old: 160, new: 208 };
        let edited = r.apply(&m).unwrap();
        assert_eq!(edited.ses[0].extrusion.dist_pos, 208);
        assert_eq!(serialize(&r.apply(&m).unwrap()), serialize(&edited));
        assert!(matches!(
            EditRecord::ChangeExtrudeDist { se: 0, old: 150, new: 208 }.apply(&m),
            Err(VariationError::RecordMismatch(_))
        ));
    }

    #[test]
    fn record_json_is_tagged_by_kind() {
        let r = EditRecord::ChangeExtrudeDist { se: 0, old: 160, new: 208 };
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["kind"], "change_extrude_dist");
        assert_eq!(v["old"], 160);
        assert_eq!(serde_json::from_value::<EditRecord>(v).unwrap(), r);
    }

    #[test]
    fn compose_merges_same_field() {
        let a = EditChain::single(EditRecord::ChangeExtrudeDist { se: 0, old: 192, new: 160 });
        let b = EditChain::single(EditRecord::ChangeExtrudeDist { se: 0, old: 160, new: 224 });
        let c = EditChain::compose(&a, &b);
        assert_eq!(c.edits, vec![EditRecord::ChangeExtrudeDist { se: 0, old: 192, new: 224 }]);
        assert!(EditChain::compose(&a, &a.inverse()).is_empty());
        let m = two_se();
        assert_eq!(c.apply(&m).unwrap(), b.apply(&a.apply(&m).unwrap()).unwrap());
    }
}
