use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::model::{BoolOp, CadModel, Curve, Extent, Extrusion, Face, Loop, SePair, Sketch};
use super::token::{tokenize, TokenSequence, EOM_TOKEN};

/// Keywords and enum literals of the grammar.
pub const VOCABULARY: &[&str] = &[
    "sketch",
    "face",
    "loop",
    "line",
    "arc",
    "circle",
    "extrude",
    "theta",
    "phi",
    "gamma",
    "origin",
    "scale",
    "dist",
    "op",
    "ext",
    "new",
    "join",
    "cut",
    "intersect",
    "one",
    "sym",
    "two",
    EOM_TOKEN,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ParseErrorKind {
    /// Token is not part of the vocabulary.
    UnknownKeyword,
    /// Known token in a position the grammar does not allow.
    UnexpectedToken,
    /// A numeral was required.
    ExpectedNumber,
    OutOfRangeNumber,
    /// Input ended before `<eom>`.
    TruncatedSequence,
    EmptyModel,
    EmptySketch,
    EmptyFace,
    EmptyLoop,
    BadEnumLiteral,
    /// Tokens after `<eom>`.
    TrailingTokens,
}

/// First offending token. `index` is in `0..=len`; `len` denotes end of input.
#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("{kind:?} at token {index}{}: {message}", token.as_ref().map(|t| format!(" ({t:?})")).unwrap_or_default())]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub index: usize,
    pub token: Option<String>,
    pub message: String,
}

struct Parser<'a> {
    toks: &'a [String],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(String::as_str)
    }

    fn err(&self, kind: ParseErrorKind, message: impl Into<String>) -> ParseError {
        ParseError { kind, index: self.pos, token: self.toks.get(self.pos).cloned(), message: message.into() }
    }

    fn truncated(&self, expected: &str) -> ParseError {
        self.err(ParseErrorKind::TruncatedSequence, format!("input ended, expected {expected}"))
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        match self.peek() {
            None => self.truncated(expected),
            Some(tok) if VOCABULARY.contains(&tok) || is_numeral_like(tok) => {
                self.err(ParseErrorKind::UnexpectedToken, format!("expected {expected}"))
            }
            Some(_) => self.err(ParseErrorKind::UnknownKeyword, format!("expected {expected}")),
        }
    }

    fn expect(&mut self, keyword: &str) -> Result<(), ParseError> {
        if self.peek() == Some(keyword) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.unexpected(&format!("{keyword:?}")))
        }
    }

    fn number(&mut self) -> Result<u8, ParseError> {
        let Some(tok) = self.peek() else {
            return Err(self.truncated("a numeral"));
        };
        let digits = tok.strip_prefix('-').unwrap_or(tok);
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return Err(self.err(ParseErrorKind::ExpectedNumber, "expected a numeral"));
        }
        if tok.starts_with('-') {
            return Err(self.err(ParseErrorKind::OutOfRangeNumber, "numerals must be in [0, 255]"));
        }
        if digits.len() > 1 && digits.starts_with('0') {
            return Err(self.err(ParseErrorKind::ExpectedNumber, "numerals have no leading zeros"));
        }
        match digits.parse::<u32>() {
            Ok(v) if v <= 255 => {
                self.pos += 1;
                Ok(v as u8)
            }
            _ => Err(self.err(ParseErrorKind::OutOfRangeNumber, "numerals must be in [0, 255]")),
        }
    }

    fn enum_literal<T>(&mut self, what: &str, lookup: fn(&str) -> Option<T>) -> Result<T, ParseError> {
        let Some(tok) = self.peek() else {
            return Err(self.truncated(what));
        };
        match lookup(tok) {
            Some(v) => {
                self.pos += 1;
                Ok(v)
            }
            None => Err(self.err(ParseErrorKind::BadEnumLiteral, format!("expected {what}"))),
        }
    }

    fn model(&mut self) -> Result<CadModel, ParseError> {
        let mut ses = Vec::new();
        loop {
            match self.peek() {
                Some("sketch") => ses.push(self.se()?),
                Some(EOM_TOKEN) if !ses.is_empty() => {
                    self.pos += 1;
                    break;
                }
                Some(EOM_TOKEN) => {
                    return Err(self.err(ParseErrorKind::EmptyModel, "a model needs at least one SE pair"))
                }
                _ if ses.is_empty() => return Err(self.unexpected("\"sketch\"")),
                _ => return Err(self.unexpected("\"sketch\" or \"<eom>\"")),
            }
        }
        if self.pos < self.toks.len() {
            return Err(self.err(ParseErrorKind::TrailingTokens, "tokens after <eom>"));
        }
        Ok(CadModel { ses })
    }

    fn se(&mut self) -> Result<SePair, ParseError> {
        self.expect("sketch")?;
        let mut faces = Vec::new();
        while self.peek() == Some("face") {
            faces.push(self.face()?);
        }
        if faces.is_empty() {
            return Err(match self.peek() {
                Some("extrude") => self.err(ParseErrorKind::EmptySketch, "a sketch needs at least one face"),
                _ => self.unexpected("\"face\""),
            });
        }
        self.expect("extrude")?;
        let extrusion = self.extrusion()?;
        Ok(SePair { sketch: Sketch { faces }, extrusion })
    }

    fn face(&mut self) -> Result<Face, ParseError> {
        self.expect("face")?;
        let mut loops = Vec::new();
        while self.peek() == Some("loop") {
            loops.push(self.curve_loop()?);
        }
        if loops.is_empty() {
            return Err(match self.peek() {
                None => self.truncated("\"loop\""),
                Some(_) => self.err(ParseErrorKind::EmptyFace, "a face needs at least one loop"),
            });
        }
        Ok(Face { loops })
    }

    fn curve_loop(&mut self) -> Result<Loop, ParseError> {
        self.expect("loop")?;
        let mut curves = Vec::new();
        loop {
            let curve = match self.peek() {
                Some("line") => {
                    self.pos += 1;
                    Curve::Line { x: self.number()?, y: self.number()? }
                }
                Some("arc") => {
                    self.pos += 1;
                    Curve::Arc { x: self.number()?, y: self.number()?, mid_x: self.number()?, mid_y: self.number()? }
                }
                Some("circle") => {
                    self.pos += 1;
                    Curve::Circle { cx: self.number()?, cy: self.number()?, r: self.number()? }
                }
                _ => break,
            };
            curves.push(curve);
        }
        if curves.is_empty() {
            return Err(match self.peek() {
                None => self.truncated("a curve"),
                Some(_) => self.err(ParseErrorKind::EmptyLoop, "a loop needs at least one curve"),
            });
        }
        Ok(Loop { curves })
    }

    fn extrusion(&mut self) -> Result<Extrusion, ParseError> {
        self.expect("theta")?;
        let theta = self.number()?;
        self.expect("phi")?;
        let phi = self.number()?;
        self.expect("gamma")?;
        let gamma = self.number()?;
        self.expect("origin")?;
        let origin = [self.number()?, self.number()?, self.number()?];
        self.expect("scale")?;
        let scale = self.number()?;
        self.expect("dist")?;
        let dist_pos = self.number()?;
        let dist_neg = self.number()?;
        self.expect("op")?;
        let op = self.enum_literal("a boolean op (new|join|cut|intersect)", BoolOp::from_literal)?;
        self.expect("ext")?;
        let extent = self.enum_literal("an extent (one|sym|two)", Extent::from_literal)?;
        Ok(Extrusion { theta, phi, gamma, origin, scale, dist_pos, dist_neg, op, extent })
    }
}

fn is_numeral_like(tok: &str) -> bool {
    let digits = tok.strip_prefix('-').unwrap_or(tok);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

/// Parses canonical sequence text into a model.
///
/// Only the grammar and the numeric range are checked here; semantic invariants
/// (loop closure, first op, SE limits) are reported by [`validate`](super::validate).
pub fn parse(text: &str) -> Result<CadModel, ParseError> {
    parse_tokens(&tokenize(text))
}

pub fn parse_tokens(tokens: &TokenSequence) -> Result<CadModel, ParseError> {
    Parser { toks: tokens.as_slice(), pos: 0 }.model()
}

/// Canonical single-space text of a model, terminated by `<eom>`.
pub fn serialize(model: &CadModel) -> String {
    let mut out = String::new();
    for se in &model.ses {
        out.push_str("sketch");
        for face in &se.sketch.faces {
            out.push_str(" face");
            for lp in &face.loops {
                out.push_str(" loop");
                for curve in &lp.curves {
                    match *curve {
                        Curve::Line { x, y } => write!(out, " line {x} {y}"),
                        Curve::Arc { x, y, mid_x, mid_y } => write!(out, " arc {x} {y} {mid_x} {mid_y}"),
                        Curve::Circle { cx, cy, r } => write!(out, " circle {cx} {cy} {r}"),
                    }
                    .expect("writing to a String cannot fail");
                }
            }
        }
        let e = &se.extrusion;
        write!(
            out,
            " extrude theta {} phi {} gamma {} origin {} {} {} scale {} dist {} {} op {} ext {} ",
            e.theta,
            e.phi,
            e.gamma,
            e.origin[0],
            e.origin[1],
            e.origin[2],
            e.scale,
            e.dist_pos,
            e.dist_neg,
            e.op,
            e.extent
        )
        .expect("writing to a String cannot fail");
    }
    out.push_str(EOM_TOKEN);
    out
}

/// Number of tokens in the canonical serialization, without building it.
pub fn token_count(model: &CadModel) -> usize {
    let curves: usize = model
        .ses
        .iter()
        .flat_map(|se| se.sketch.faces.iter())
        .flat_map(|f| f.loops.iter())
        .map(|lp| {
            1 + lp
                .curves
                .iter()
                .map(|c| match c {
                    Curve::Line { .. } => 3,
                    Curve::Arc { .. } => 5,
                    Curve::Circle { .. } => 4,
                })
                .sum::<usize>()
        })
        .sum();
    let faces: usize = model.ses.iter().map(|se| se.sketch.faces.len()).sum();
    // sketch + extrude + 19 extrusion parameter tokens per SE
    model.ses.len() * 21 + faces + curves + 1
}
