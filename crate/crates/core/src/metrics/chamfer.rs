use crate::geometry::vec3::dist2;
use crate::geometry::P3;
use crate::scalar::Real;

use super::MetricsError;

/// Static 3-d tree over a borrowed point set for exact nearest-neighbor queries.
pub struct KdTree<'a, F> {
    points: &'a [P3<F>],
    /// Point indices in tree order; node `[lo, hi)` splits at `(lo + hi) / 2`.
    order: Vec<usize>,
}

impl<'a, F: Real> KdTree<'a, F> {
    pub fn new(points: &'a [P3<F>]) -> Self {
        let mut order: Vec<usize> = (0..points.len()).collect();
        build(points, &mut order, 0);
        KdTree { points, order }
    }

    /// Squared distance from `q` to its nearest point; `None` for an empty tree.
    pub fn nearest_dist2(&self, q: P3<F>) -> Option<F> {
        if self.order.is_empty() {
            return None;
        }
        let mut best = F::infinity();
        self.search(0, self.order.len(), 0, q, &mut best);
        Some(best)
    }

    fn search(&self, lo: usize, hi: usize, depth: usize, q: P3<F>, best: &mut F) {
        if lo >= hi {
            return;
        }
        let mid = (lo + hi) / 2;
        let p = self.points[self.order[mid]];
        let d = dist2(q, p);
        if d < *best {
            *best = d;
        }
        let axis = depth % 3;
        let diff = q[axis] - p[axis];
        let (near, far) = if diff < F::zero() { ((lo, mid), (mid + 1, hi)) } else { ((mid + 1, hi), (lo, mid)) };
        self.search(near.0, near.1, depth + 1, q, best);
        if diff * diff <= *best {
            self.search(far.0, far.1, depth + 1, q, best);
        }
    }
}

fn build<F: Real>(points: &[P3<F>], idx: &mut [usize], depth: usize) {
    if idx.len() <= 1 {
        return;
    }
    let axis = depth % 3;
    let mid = idx.len() / 2;
    idx.select_nth_unstable_by(mid, |&a, &b| {
        points[a][axis].partial_cmp(&points[b][axis]).unwrap_or(std::cmp::Ordering::Equal)
    });
    let (left, right) = idx.split_at_mut(mid);
    build(points, left, depth + 1);
    build(points, &mut right[1..], depth + 1);
}

fn directed_mean<F: Real>(from: &[P3<F>], to: &KdTree<'_, F>) -> F {
    let mut sum = F::zero();
    for &p in from {
        sum += to.nearest_dist2(p).expect("non-empty tree");
    }
    sum / F::from_usize_lossy(from.len())
}

/// Mean squared nearest-neighbor distance from `a` to `b` plus that from `b` to `a`.
pub fn chamfer<F: Real>(a: &[P3<F>], b: &[P3<F>]) -> Result<F, MetricsError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    Ok(directed_mean(a, &KdTree::new(b)) + directed_mean(b, &KdTree::new(a)))
}
