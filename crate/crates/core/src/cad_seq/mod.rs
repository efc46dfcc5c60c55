//! Textual sketch-and-extrude grammar: model types, parser, serializer, tokenizer
//! and validation.
//!
//! ```text
//! model   := se+ "<eom>"
//! se      := "sketch" face+ "extrude" eparams
//! face    := "face" loop+
//! loop    := "loop" curve+
//! curve   := "line" X Y | "arc" X Y MX MY | "circle" CX CY R
//! eparams := "theta" T "phi" P "gamma" G "origin" PX PY PZ "scale" S
//!            "dist" E1 E2 "op" (new|join|cut|intersect) "ext" (one|sym|two)
//! ```
//!
//! Every numeral is a base-10 integer in `[0, 255]`.

mod model;
mod parse;
mod token;
mod validate;

pub use model::{BoolOp, CadModel, Curve, Extent, Extrusion, Face, Loop, SePair, Sketch};
pub use parse::{parse, parse_tokens, serialize, token_count, ParseError, ParseErrorKind, VOCABULARY};
pub use token::{tokenize, TokenSequence, EOM_TOKEN, MASK_TOKEN};
pub use validate::{validate, IssueCode, ValidationConfig, ValidationIssue, ValidationReport};

/// Parses and re-serializes, yielding the canonical text.
pub fn canonicalize(text: &str) -> Result<String, ParseError> {
    parse(text).map(|m| serialize(&m))
}
