use serde::{Deserialize, Serialize};

use super::model::{BoolOp, CadModel, Curve};
use super::parse::token_count;

/// Dataset limits applied on top of the type invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub max_se: Option<usize>,
    pub max_tokens: Option<usize>,
}

impl ValidationConfig {
    /// Limits of the editing dataset: at most 3 SE pairs and 1024 tokens.
    pub const DATASET: ValidationConfig = ValidationConfig { max_se: Some(3), max_tokens: Some(1024) };

    /// Type invariants only.
    pub const UNBOUNDED: ValidationConfig = ValidationConfig { max_se: None, max_tokens: None };
}

impl Default for ValidationConfig {
    fn default() -> Self {
        Self::DATASET
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IssueCode {
    EmptyModel,
    TooManySe,
    TooLong,
    FirstOpNotNew,
    EmptySketch,
    EmptyFace,
    EmptyLoop,
    MixedCircleLoop,
    TooFewVertices,
    ZeroRadius,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub code: IssueCode,
    /// Location such as `ses[1].sketch.faces[0].loops[2]`.
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub is_valid: bool,
    pub errors: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn has(&self, code: IssueCode) -> bool {
        self.errors.iter().any(|e| e.code == code)
    }
}

/// Checks every model invariant and the configured limits, collecting all violations.
pub fn validate(model: &CadModel, config: &ValidationConfig) -> ValidationReport {
    let mut errors = Vec::new();
    let mut push = |code, path: String, message: String| errors.push(ValidationIssue { code, path, message });

    if model.ses.is_empty() {
        push(IssueCode::EmptyModel, String::new(), "model has no SE pairs".into());
    }
    if let Some(max) = config.max_se {
        if model.ses.len() > max {
            push(IssueCode::TooManySe, "ses".into(), format!("{} SE pairs exceed the limit of {max}", model.ses.len()));
        }
    }
    if let Some(max) = config.max_tokens {
        let n = token_count(model);
        if n > max {
            push(IssueCode::TooLong, String::new(), format!("{n} tokens exceed the limit of {max}"));
        }
    }

    for (si, se) in model.ses.iter().enumerate() {
        if si == 0 && se.extrusion.op != BoolOp::New {
            push(
                IssueCode::FirstOpNotNew,
                "ses[0].extrusion.op".into(),
                format!("first SE pair must use op new, found {}", se.extrusion.op),
            );
        }
        if se.sketch.faces.is_empty() {
            push(IssueCode::EmptySketch, format!("ses[{si}].sketch"), "sketch has no faces".into());
        }
        for (fi, face) in se.sketch.faces.iter().enumerate() {
            if face.loops.is_empty() {
                push(IssueCode::EmptyFace, format!("ses[{si}].sketch.faces[{fi}]"), "face has no loops".into());
            }
            for (li, lp) in face.loops.iter().enumerate() {
                let path = format!("ses[{si}].sketch.faces[{fi}].loops[{li}]");
                let circles = lp.curves.iter().filter(|c| c.is_circle()).count();
                if lp.curves.is_empty() {
                    push(IssueCode::EmptyLoop, path.clone(), "loop has no curves".into());
                } else if circles > 0 && lp.curves.len() > 1 {
                    push(
                        IssueCode::MixedCircleLoop,
                        path.clone(),
                        "a circle must be the only curve of its loop".into(),
                    );
                } else if circles == 0 {
                    // arcs contribute their mid point to the closed outline
                    let points: usize =
                        lp.curves.iter().map(|c| if matches!(c, Curve::Arc { .. }) { 2 } else { 1 }).sum();
                    if points < 3 {
                        push(
                            IssueCode::TooFewVertices,
                            path.clone(),
                            format!("closed loop has {points} points, needs at least 3"),
                        );
                    }
                }
                for curve in &lp.curves {
                    if let Curve::Circle { r: 0, .. } = curve {
                        push(IssueCode::ZeroRadius, path.clone(), "circle radius must be at least 1".into());
                    }
                }
            }
        }
    }

    ValidationReport { is_valid: errors.is_empty(), errors }
}
