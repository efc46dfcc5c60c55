//! Small fixed-size vector helpers.

use crate::scalar::Real;

pub type P2<F> = [F; 2];
pub type P3<F> = [F; 3];

pub fn add<F: Real>(a: P3<F>, b: P3<F>) -> P3<F> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub<F: Real>(a: P3<F>, b: P3<F>) -> P3<F> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale<F: Real>(a: P3<F>, s: F) -> P3<F> {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot<F: Real>(a: P3<F>, b: P3<F>) -> F {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross<F: Real>(a: P3<F>, b: P3<F>) -> P3<F> {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm<F: Real>(a: P3<F>) -> F {
    dot(a, a).sqrt()
}

pub fn normalize<F: Real>(a: P3<F>) -> P3<F> {
    let n = norm(a);
    if n > F::zero() {
        scale(a, F::one() / n)
    } else {
        a
    }
}

pub fn dist2<F: Real>(a: P3<F>, b: P3<F>) -> F {
    let d = sub(a, b);
    dot(d, d)
}

/// Axis-aligned bounds `(min, max)`; `None` for an empty input.
pub fn bounds<F: Real>(points: impl IntoIterator<Item = P3<F>>) -> Option<(P3<F>, P3<F>)> {
    let mut it = points.into_iter();
    let first = it.next()?;
    Some(it.fold((first, first), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1]), lo[2].min(p[2])], [hi[0].max(p[0]), hi[1].max(p[1]), hi[2].max(p[2])])
    }))
}
