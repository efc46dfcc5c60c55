use crate::cad_seq::{Curve, Loop, Sketch};
use crate::scalar::Real;

use super::dequant;
use super::vec3::P2;
use super::GeometryError;

/// Segments per arc.
pub const ARC_SEGMENTS: usize = 32;
/// Sides of the polygon standing in for a circle.
pub const CIRCLE_SEGMENTS: usize = 64;

/// One region of a sketch: a counter-clockwise outer boundary and clockwise holes.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceProfile<F> {
    pub outer: Vec<P2<F>>,
    pub holes: Vec<Vec<P2<F>>>,
}

/// Discretized sketch in dequantized sketch-plane units.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile2D<F> {
    pub faces: Vec<FaceProfile<F>>,
}

/// Signed shoelace area; positive for counter-clockwise rings.
pub fn signed_area<F: Real>(ring: &[P2<F>]) -> F {
    let n = ring.len();
    let mut acc = F::zero();
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a[0] * b[1] - b[0] * a[1];
    }
    acc * F::lit(0.5)
}

/// Crossing-number test.
pub fn point_in_ring<F: Real>(ring: &[P2<F>], p: P2<F>) -> bool {
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0];
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

impl<F: Real> FaceProfile<F> {
    pub fn contains(&self, p: P2<F>) -> bool {
        point_in_ring(&self.outer, p) && !self.holes.iter().any(|h| point_in_ring(h, p))
    }

    pub fn area(&self) -> F {
        signed_area(&self.outer) + self.holes.iter().map(|h| signed_area(h)).sum::<F>()
    }

    pub fn rings(&self) -> impl Iterator<Item = &Vec<P2<F>>> {
        std::iter::once(&self.outer).chain(self.holes.iter())
    }
}

impl<F: Real> Profile2D<F> {
    pub fn contains(&self, p: P2<F>) -> bool {
        self.faces.iter().any(|f| f.contains(p))
    }

    /// Total enclosed area.
    pub fn area(&self) -> F {
        self.faces.iter().map(FaceProfile::area).sum()
    }

    pub fn bounds(&self) -> (P2<F>, P2<F>) {
        let mut lo = [F::infinity(); 2];
        let mut hi = [F::neg_infinity(); 2];
        for p in self.faces.iter().flat_map(|f| f.outer.iter()) {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        (lo, hi)
    }
}

fn point<F: Real>(x: u8, y: u8) -> P2<F> {
    [dequant::coord(x), dequant::coord(y)]
}

/// Points along the arc from `start` through `mid` to `end`, excluding `start`.
fn arc_points<F: Real>(start: P2<F>, mid: P2<F>, end: P2<F>, segments: usize) -> Vec<P2<F>> {
    let two = F::lit(2.0);
    let d = two * (start[0] * (mid[1] - end[1]) + mid[0] * (end[1] - start[1]) + end[0] * (start[1] - mid[1]));
    if d.abs() < F::lit(1e-12) {
        // collinear or closed: the arc degenerates to its chord
        return vec![end];
    }
    let sq = |p: P2<F>| p[0] * p[0] + p[1] * p[1];
    let (s2, m2, e2) = (sq(start), sq(mid), sq(end));
    let cx = (s2 * (mid[1] - end[1]) + m2 * (end[1] - start[1]) + e2 * (start[1] - mid[1])) / d;
    let cy = (s2 * (end[0] - mid[0]) + m2 * (start[0] - end[0]) + e2 * (mid[0] - start[0])) / d;
    let r = ((start[0] - cx).powi(2) + (start[1] - cy).powi(2)).sqrt();
    let angle = |p: P2<F>| (p[1] - cy).atan2(p[0] - cx);
    let wrap = |a: F| {
        let t = a % F::TAU();
        if t < F::zero() {
            t + F::TAU()
        } else {
            t
        }
    };
    let a_start = angle(start);
    let ccw_sweep = wrap(angle(end) - a_start);
    let sweep = if wrap(angle(mid) - a_start) < ccw_sweep { ccw_sweep } else { ccw_sweep - F::TAU() };
    let mut out: Vec<P2<F>> = (1..segments)
        .map(|i| {
            let a = a_start + sweep * F::from_usize_lossy(i) / F::from_usize_lossy(segments);
            [cx + r * a.cos(), cy + r * a.sin()]
        })
        .collect();
    out.push(end);
    out
}

/// Closed polyline of a loop with the given discretization; the closing edge is implicit.
pub fn loop_polyline<F: Real>(lp: &Loop, arc_segments: usize, circle_segments: usize) -> Vec<P2<F>> {
    if let [Curve::Circle { cx, cy, r }] = lp.curves.as_slice() {
        let c = point::<F>(*cx, *cy);
        let radius = F::from_u8(*r).unwrap() / F::lit(128.0);
        return (0..circle_segments)
            .map(|k| {
                let a = F::TAU() * F::from_usize_lossy(k) / F::from_usize_lossy(circle_segments);
                [c[0] + radius * a.cos(), c[1] + radius * a.sin()]
            })
            .collect();
    }
    let Some(mut cursor) = lp.curves.iter().rev().find_map(Curve::end_point) else {
        return Vec::new();
    };
    let mut pts: Vec<P2<F>> = Vec::new();
    for curve in &lp.curves {
        match *curve {
            Curve::Line { x, y } => {
                pts.push(point(x, y));
                cursor = (x, y);
            }
            Curve::Arc { x, y, mid_x, mid_y } => {
                pts.extend(arc_points(point(cursor.0, cursor.1), point(mid_x, mid_y), point(x, y), arc_segments));
                cursor = (x, y);
            }
            Curve::Circle { .. } => {}
        }
    }
    pts.dedup();
    while pts.len() > 1 && pts.first() == pts.last() {
        pts.pop();
    }
    pts
}

fn orient<F: Real>(a: P2<F>, b: P2<F>, c: P2<F>) -> F {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn on_segment<F: Real>(a: P2<F>, b: P2<F>, p: P2<F>) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

fn segments_touch<F: Real>(a: P2<F>, b: P2<F>, c: P2<F>, d: P2<F>) -> bool {
    let (o1, o2, o3, o4) = (orient(a, b, c), orient(a, b, d), orient(c, d, a), orient(c, d, b));
    let z = F::zero();
    if ((o1 > z && o2 < z) || (o1 < z && o2 > z)) && ((o3 > z && o4 < z) || (o3 < z && o4 > z)) {
        return true;
    }
    (o1 == z && on_segment(a, b, c))
        || (o2 == z && on_segment(a, b, d))
        || (o3 == z && on_segment(c, d, a))
        || (o4 == z && on_segment(c, d, b))
}

/// True when two non-adjacent edges of the closed ring meet.
pub fn ring_self_intersects<F: Real>(ring: &[P2<F>]) -> bool {
    let n = ring.len();
    if n < 4 {
        return false;
    }
    for i in 0..n {
        let (a, b) = (ring[i], ring[(i + 1) % n]);
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            if segments_touch(a, b, ring[j], ring[(j + 1) % n]) {
                return true;
            }
        }
    }
    false
}

/// Discretizes a sketch and normalizes orientation (outer counter-clockwise, holes clockwise).
pub fn build_profile<F: Real>(sketch: &Sketch) -> Result<Profile2D<F>, GeometryError> {
    build_profile_at(sketch, "sketch")
}

pub(crate) fn build_profile_at<F: Real>(sketch: &Sketch, prefix: &str) -> Result<Profile2D<F>, GeometryError> {
    let eps = F::lit(1e-9);
    let mut faces = Vec::with_capacity(sketch.faces.len());
    for (fi, face) in sketch.faces.iter().enumerate() {
        let mut rings = Vec::with_capacity(face.loops.len());
        for (li, lp) in face.loops.iter().enumerate() {
            let path = format!("{prefix}.faces[{fi}].loops[{li}]");
            let mut ring = loop_polyline::<F>(lp, ARC_SEGMENTS, CIRCLE_SEGMENTS);
            if ring.len() < 3 || signed_area(&ring).abs() < eps {
                return Err(GeometryError::DegenerateLoop { path });
            }
            if ring_self_intersects(&ring) {
                return Err(GeometryError::SelfIntersecting { path });
            }
            let want_ccw = li == 0;
            if (signed_area(&ring) > F::zero()) != want_ccw {
                ring.reverse();
            }
            rings.push(ring);
        }
        let mut it = rings.into_iter();
        let Some(outer) = it.next() else {
            return Err(GeometryError::DegenerateLoop { path: format!("{prefix}.faces[{fi}]") });
        };
        let holes: Vec<_> = it.collect();
        for (hi, hole) in holes.iter().enumerate() {
            if !hole.iter().all(|&p| point_in_ring(&outer, p)) {
                return Err(GeometryError::HoleOutsideOuter {
                    path: format!("{prefix}.faces[{fi}].loops[{}]", hi + 1),
                });
            }
        }
        faces.push(FaceProfile { outer, holes });
    }
    Ok(Profile2D { faces })
}
