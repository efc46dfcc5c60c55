use crate::cad_seq::{BoolOp, CadModel, Extent};
use crate::variation::{loop_bbox, EditChain, EditRecord, PrimitiveClass};

use super::{CaptionBackend, CaptionError, CaptionStep, StepContext};

/// Deterministic captioner driven by ground-truth edit records.
///
/// Each record kind has one template family and every instruction names the
/// primitive class of the edited part.
#[derive(Debug, Clone, Copy, Default)]
pub struct TemplateCaptioner;

fn op_phrase(op: BoolOp) -> &'static str {
    match op {
        BoolOp::New => "a new body",
        BoolOp::Join => "an added body",
        BoolOp::Cut => "a cut",
        BoolOp::Intersect => "an intersection",
    }
}

fn extrusion_height(d: u8, extent: Extent, neg: u8) -> f64 {
    let pos = (f64::from(d) - 128.0).abs() / 128.0;
    match extent {
        Extent::Two => pos + (f64::from(neg) - 128.0).abs() / 128.0,
        _ => pos,
    }
}

/// Plain-language description of a model, one sentence per SE pair.
pub fn describe_model(model: &CadModel) -> String {
    let mut out = format!("The model has {} part{}.", model.ses.len(), if model.ses.len() == 1 { "" } else { "s" });
    for (i, se) in model.ses.iter().enumerate() {
        let e = &se.extrusion;
        let holes: usize = se.sketch.faces.iter().map(|f| f.loops.len() - 1).sum();
        let (x0, y0, x1, y1) = se.outer_loop().map(loop_bbox).unwrap_or_default();
        out.push_str(&format!(
            " Part {} is a {} of footprint {} by {} units and height {:.2}, combined as {}, at origin ({}, {}, {}){}.",
            i + 1,
            PrimitiveClass::of_se(se),
            x1 - x0,
            y1 - y0,
            extrusion_height(e.dist_pos, e.extent, e.dist_neg),
            op_phrase(e.op),
            e.origin[0],
            e.origin[1],
            e.origin[2],
            if holes > 0 { format!(" with {holes} hole{}", if holes == 1 { "" } else { "s" }) } else { String::new() },
        ));
    }
    out
}

fn loop_size(lp: &crate::cad_seq::Loop) -> u32 {
    let (x0, y0, x1, y1) = loop_bbox(lp);
    u32::from(x1 - x0) + u32::from(y1 - y0)
}

fn directions(old: [u8; 3], new: [u8; 3]) -> String {
    let parts: Vec<String> = (0..3)
        .filter(|&i| old[i] != new[i])
        .map(|i| {
            let sign = if new[i] > old[i] { "positive" } else { "negative" };
            format!("{sign} {} axis", ["x", "y", "z"][i])
        })
        .collect();
    parts.join(" and the ")
}

/// Concise instruction for one record applied to `before`.
fn instruction(record: &EditRecord, before: &CadModel) -> String {
    let class = record.primitive_class(before);
    match record {
        EditRecord::AddSe { se, .. } => match se.extrusion.op {
            BoolOp::Cut => format!("Cut a {class} into the model."),
            BoolOp::Intersect => format!("Intersect the model with a {class}."),
            BoolOp::New | BoolOp::Join => format!("Add a {class}."),
        },
        EditRecord::DeleteSe { .. } => format!("Remove the {class}."),
        EditRecord::ReplacePrimitive { new, .. } => {
            format!("Replace the {class} with a {}.", PrimitiveClass::of_loop(new))
        }
        EditRecord::ScaleLoop { old, new, .. } => match loop_size(new).cmp(&loop_size(old)) {
            std::cmp::Ordering::Greater => format!("Enlarge the {class}."),
            std::cmp::Ordering::Less => format!("Shrink the {class}."),
            std::cmp::Ordering::Equal => format!("Reshape the {class}."),
        },
        EditRecord::TranslateSketch { old, new, .. } => {
            format!("Move the {class} along the {}.", directions(*old, *new))
        }
        EditRecord::ChangeExtrudeDist { old, new, .. } => {
            let (a, b) = ((i16::from(*old) - 128).abs(), (i16::from(*new) - 128).abs());
            match b.cmp(&a) {
                std::cmp::Ordering::Greater => format!("Increase the extrusion height of the {class}."),
                std::cmp::Ordering::Less => format!("Decrease the extrusion height of the {class}."),
                std::cmp::Ordering::Equal => format!("Reverse the extrusion direction of the {class}."),
            }
        }
        EditRecord::ChangeBoolOp { old, new, .. } => {
            format!("Change the {class} from {} to {}.", op_phrase(*old), op_phrase(*new))
        }
    }
}

/// Longer statement of the same change, used as the difference-listing step.
fn difference(record: &EditRecord, before: &CadModel) -> String {
    let class = record.primitive_class(before);
    match record {
        EditRecord::AddSe { index, se } => format!(
            "The edited model has an extra {class} (part {}) combined as {}.",
            index + 1,
            op_phrase(se.extrusion.op)
        ),
        EditRecord::DeleteSe { index, se } => format!(
            "The {class} (part {}, combined as {}) of the original model is absent from the edited model.",
            index + 1,
            op_phrase(se.extrusion.op)
        ),
        EditRecord::ReplacePrimitive { target, new, .. } => format!(
            "The {class} profile of part {} becomes a {} profile of similar size.",
            target.se + 1,
            PrimitiveClass::of_loop(new)
        ),
        EditRecord::ScaleLoop { target, old, new } => format!(
            "The {class} profile of part {} changes its footprint from {} to {} units.",
            target.se + 1,
            loop_size(old),
            loop_size(new)
        ),
        EditRecord::TranslateSketch { se, old, new } => {
            format!("The {class} (part {}) moves from origin {:?} to {:?}.", se + 1, old, new)
        }
        EditRecord::ChangeExtrudeDist { se, old, new } => {
            format!("The extrusion distance of the {class} (part {}) changes from {} to {}.", se + 1, old, new)
        }
        EditRecord::ChangeBoolOp { se, old, new } => {
            format!("The {class} (part {}) is combined as {} instead of {}.", se + 1, op_phrase(*new), op_phrase(*old))
        }
    }
}

fn per_record(
    chain: &EditChain,
    before: &CadModel,
    f: fn(&EditRecord, &CadModel) -> String,
    sep: &str,
) -> Result<String, CaptionError> {
    let steps = chain.steps(before).map_err(|_| CaptionError::RecordMismatch)?;
    Ok(steps.iter().map(|(r, m)| f(r, m)).collect::<Vec<_>>().join(sep))
}

impl TemplateCaptioner {
    /// The final instruction for a chain applied to `orig`.
    pub fn caption(chain: &EditChain, orig: &CadModel) -> Result<String, CaptionError> {
        per_record(chain, orig, instruction, " ")
    }

    fn answer(&self, ctx: &StepContext<'_>) -> Result<String, CaptionError> {
        match ctx.step {
            CaptionStep::DescribeOriginal => Ok(describe_model(ctx.orig)),
            CaptionStep::DescribeEdited => Ok(describe_model(ctx.edit)),
            CaptionStep::Differences => {
                let chain = ctx.chain.ok_or(CaptionError::MissingRecord)?;
                per_record(chain, ctx.orig, difference, "\n")
            }
            CaptionStep::Compress => {
                let chain = ctx.chain.ok_or(CaptionError::MissingRecord)?;
                Self::caption(chain, ctx.orig)
            }
        }
    }
}

impl CaptionBackend for TemplateCaptioner {
    fn describe_image(
        &self,
        _images: &[Vec<u8>],
        _prompt: &str,
        ctx: &StepContext<'_>,
    ) -> Result<String, CaptionError> {
        self.answer(ctx)
    }

    fn describe_sequence(&self, _text: &str, _prompt: &str, ctx: &StepContext<'_>) -> Result<String, CaptionError> {
        self.answer(ctx)
    }

    fn complete(&self, _prompt: &str, ctx: &StepContext<'_>) -> Result<String, CaptionError> {
        self.answer(ctx)
    }

    fn is_template(&self) -> bool {
        true
    }
}
