use std::fmt;

use serde::{Deserialize, Serialize};

/// Quantized sketch-and-extrude program: an ordered list of SE pairs.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CadModel {
    pub ses: Vec<SePair>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SePair {
    pub sketch: Sketch,
    pub extrusion: Extrusion,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sketch {
    pub faces: Vec<Face>,
}

/// One profile region. The first loop is the outer boundary, the rest are holes.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Face {
    pub loops: Vec<Loop>,
}

/// Implicitly closed chain of curves: the first curve starts where the last one ends.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Loop {
    pub curves: Vec<Curve>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Curve {
    Line { x: u8, y: u8 },
    Arc { x: u8, y: u8, mid_x: u8, mid_y: u8 },
    Circle { cx: u8, cy: u8, r: u8 },
}

impl Curve {
    /// End point of a line or arc; `None` for circles.
    pub fn end_point(&self) -> Option<(u8, u8)> {
        match *self {
            Curve::Line { x, y } | Curve::Arc { x, y, .. } => Some((x, y)),
            Curve::Circle { .. } => None,
        }
    }

    pub fn is_circle(&self) -> bool {
        matches!(self, Curve::Circle { .. })
    }

    pub fn keyword(&self) -> &'static str {
        match self {
            Curve::Line { .. } => "line",
            Curve::Arc { .. } => "arc",
            Curve::Circle { .. } => "circle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Extrusion {
    pub theta: u8,
    pub phi: u8,
    pub gamma: u8,
    pub origin: [u8; 3],
    pub scale: u8,
    pub dist_pos: u8,
    pub dist_neg: u8,
    pub op: BoolOp,
    pub extent: Extent,
}

impl Default for Extrusion {
    fn default() -> Self {
        Extrusion {
            theta: 0,
            phi: 128,
            gamma: 128,
            origin: [128, 128, 128],
            scale: 128,
            dist_pos: 160,
            dist_neg: 128,
            op: BoolOp::New,
            extent: Extent::One,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoolOp {
    New,
    Join,
    Cut,
    Intersect,
}

impl BoolOp {
    pub const ALL: [BoolOp; 4] = [BoolOp::New, BoolOp::Join, BoolOp::Cut, BoolOp::Intersect];

    pub fn literal(self) -> &'static str {
        match self {
            BoolOp::New => "new",
            BoolOp::Join => "join",
            BoolOp::Cut => "cut",
            BoolOp::Intersect => "intersect",
        }
    }

    pub fn from_literal(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.literal() == s)
    }
}

impl fmt::Display for BoolOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.literal())
    }
}

/// How the profile is swept along the plane normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extent {
    One,
    Sym,
    Two,
}

impl Extent {
    pub const ALL: [Extent; 3] = [Extent::One, Extent::Sym, Extent::Two];

    pub fn literal(self) -> &'static str {
        match self {
            Extent::One => "one",
            Extent::Sym => "sym",
            Extent::Two => "two",
        }
    }

    pub fn from_literal(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.literal() == s)
    }
}

impl fmt::Display for Extent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.literal())
    }
}

impl Loop {
    pub fn circle(cx: u8, cy: u8, r: u8) -> Self {
        Loop { curves: vec![Curve::Circle { cx, cy, r }] }
    }

    /// Closed polyline through `points`, in order.
    pub fn polygon(points: &[(u8, u8)]) -> Self {
        Loop { curves: points.iter().map(|&(x, y)| Curve::Line { x, y }).collect() }
    }

    /// Axis-aligned rectangle with corners `(x0, y0)` and `(x1, y1)`, counter-clockwise.
    pub fn rectangle(x0: u8, y0: u8, x1: u8, y1: u8) -> Self {
        Self::polygon(&[(x1, y0), (x1, y1), (x0, y1), (x0, y0)])
    }

    /// Curve endpoints in order; empty for a circle loop.
    pub fn vertices(&self) -> Vec<(u8, u8)> {
        self.curves.iter().filter_map(Curve::end_point).collect()
    }

    pub fn is_circle(&self) -> bool {
        self.curves.len() == 1 && self.curves[0].is_circle()
    }
}

impl SePair {
    /// Single-face, single-loop SE pair.
    pub fn simple(outer: Loop, extrusion: Extrusion) -> Self {
        SePair { sketch: Sketch { faces: vec![Face { loops: vec![outer] }] }, extrusion }
    }

    pub fn outer_loop(&self) -> Option<&Loop> {
        self.sketch.faces.first().and_then(|f| f.loops.first())
    }
}
