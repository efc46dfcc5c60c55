use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::assembly::{Prism, SolidAssembly};
use super::vec3::{self, P3};
use super::GeometryError;

/// Surface sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub points: usize,
    pub seed: u64,
    /// Half-width of the membership band, in normalized units.
    pub band: f64,
    /// Candidates kept before farthest-point subsampling, as a multiple of `points`.
    pub oversample: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { points: 2000, seed: 0, band: 0.01, oversample: 2 }
    }
}

/// Surface samples normalized so the longest bounding-box axis spans `[-0.5, 0.5]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud<F> {
    pub points: Vec<P3<F>>,
    pub seed: u64,
}

impl<F: Real> PointCloud<F> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

enum Patch {
    Cap { prim: usize, top: bool },
    Side { prim: usize, face: usize, ring: usize, edge: usize },
}

struct Sampler<'a, F> {
    prims: &'a [Prism<F>],
    patches: Vec<Patch>,
    cumulative: Vec<f64>,
}

impl<'a, F: Real> Sampler<'a, F> {
    fn new(prims: &'a [Prism<F>]) -> Self {
        let mut patches = Vec::new();
        let mut cumulative = Vec::new();
        let mut total = 0.0;
        let mut push = |patch, area: f64| {
            if area > 0.0 {
                total += area;
                patches.push(patch);
                cumulative.push(total);
            }
        };
        for (pi, prim) in prims.iter().enumerate() {
            let s = prim.frame.scale.as_f64();
            let cap = prim.profile.area().as_f64() * s * s;
            push(Patch::Cap { prim: pi, top: false }, cap);
            push(Patch::Cap { prim: pi, top: true }, cap);
            let h = prim.height().as_f64();
            for (fi, face) in prim.profile.faces.iter().enumerate() {
                for (ri, ring) in face.rings().enumerate() {
                    for e in 0..ring.len() {
                        let a = ring[e];
                        let b = ring[(e + 1) % ring.len()];
                        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt().as_f64();
                        push(Patch::Side { prim: pi, face: fi, ring: ri, edge: e }, len * s * h);
                    }
                }
            }
        }
        Sampler { prims, patches, cumulative }
    }

    /// Point on a primitive boundary with its outward unit normal.
    fn sample(&self, rng: &mut ChaCha8Rng) -> Option<(P3<F>, P3<F>)> {
        let total = *self.cumulative.last()?;
        let r = rng.gen::<f64>() * total;
        let idx = self.cumulative.partition_point(|&c| c <= r).min(self.patches.len() - 1);
        match self.patches[idx] {
            Patch::Cap { prim, top } => {
                let p = &self.prims[prim];
                let (lo, hi) = p.profile.bounds();
                // rejection sampling inside the profile
                for _ in 0..64 {
                    let u = lo[0] + (hi[0] - lo[0]) * F::lit(rng.gen::<f64>());
                    let v = lo[1] + (hi[1] - lo[1]) * F::lit(rng.gen::<f64>());
                    if p.profile.contains([u, v]) {
                        let w = if top { p.z_max } else { p.z_min };
                        let n = if top { p.frame.normal } else { vec3::scale(p.frame.normal, -F::one()) };
                        return Some((p.frame.to_world(u, v, w), n));
                    }
                }
                None
            }
            Patch::Side { prim, face, ring, edge } => {
                let p = &self.prims[prim];
                let f = &p.profile.faces[face];
                let ring = if ring == 0 { &f.outer } else { &f.holes[ring - 1] };
                let a = ring[edge];
                let b = ring[(edge + 1) % ring.len()];
                let t = F::lit(rng.gen::<f64>());
                let w = p.z_min + p.height() * F::lit(rng.gen::<f64>());
                let u = a[0] + (b[0] - a[0]) * t;
                let v = a[1] + (b[1] - a[1]) * t;
                // outer rings are counter-clockwise and holes clockwise, so (dy, -dx) points out of the material
                let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
                let n = vec3::normalize(vec3::add(vec3::scale(p.frame.x_axis, dy), vec3::scale(p.frame.y_axis, -dx)));
                Some((p.frame.to_world(u, v, w), n))
            }
        }
    }
}

/// Indices of a farthest-point subsample of size `n`, starting from the first point.
fn farthest_point_indices<F: Real>(points: &[P3<F>], n: usize) -> Vec<usize> {
    if points.len() <= n {
        return (0..points.len()).collect();
    }
    let mut chosen = Vec::with_capacity(n);
    let mut nearest = vec![F::infinity(); points.len()];
    let mut current = 0;
    for _ in 0..n {
        chosen.push(current);
        let c = points[current];
        let mut best = (F::neg_infinity(), 0);
        for (i, p) in points.iter().enumerate() {
            let d = vec3::dist2(*p, c);
            if d < nearest[i] {
                nearest[i] = d;
            }
            if nearest[i] > best.0 {
                best = (nearest[i], i);
            }
        }
        current = best.1;
    }
    chosen
}

/// Centers the points and scales them so the longest bounding-box axis spans exactly `[-0.5, 0.5]`.
pub fn normalize_points<F: Real>(points: &mut [P3<F>]) {
    let Some((lo, hi)) = vec3::bounds(points.iter().copied()) else {
        return;
    };
    let ext = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
    let longest = (0..3).fold(0, |best, k| if ext[k] > ext[best] { k } else { best });
    let len = ext[longest];
    if len <= F::zero() {
        points.iter_mut().for_each(|p| *p = [F::zero(); 3]);
        return;
    }
    let half = F::lit(0.5);
    for p in points.iter_mut() {
        for k in 0..3 {
            // (p - lo) / len maps the longest axis onto [0, 1] exactly
            p[k] = (p[k] - lo[k]) / len - half * (ext[k] / len);
        }
    }
}

/// Samples `cfg.points` points on the solid surface, in model coordinates.
///
/// Candidates are drawn uniformly by area on every primitive boundary and kept
/// only where solid membership flips across a band of half-width `cfg.band`
/// along the boundary normal; the survivors are thinned by farthest-point
/// sampling.
pub fn sample_surface<F: Real>(assembly: &SolidAssembly<F>, cfg: &SampleConfig) -> Result<Vec<P3<F>>, GeometryError> {
    let (lo, hi) = assembly.bounds().ok_or(GeometryError::EmptySolid)?;
    let extent = (0..3).map(|k| hi[k] - lo[k]).fold(F::zero(), F::max);
    if extent <= F::zero() || cfg.points == 0 {
        return Err(GeometryError::EmptySolid);
    }
    let band = F::lit(cfg.band) * extent;
    let sampler = Sampler::new(&assembly.primitives);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let target = cfg.points * cfg.oversample.max(1);
    let max_draws = target * 40;
    let mut kept = Vec::with_capacity(target);
    for _ in 0..max_draws {
        if kept.len() >= target {
            break;
        }
        let Some((p, n)) = sampler.sample(&mut rng) else {
            continue;
        };
        let outside = assembly.contains(vec3::add(p, vec3::scale(n, band)));
        let inside = assembly.contains(vec3::sub(p, vec3::scale(n, band)));
        if inside != outside {
            kept.push(p);
        }
    }
    if kept.is_empty() {
        return Err(GeometryError::EmptySolid);
    }
    Ok(if kept.len() >= cfg.points {
        farthest_point_indices(&kept, cfg.points).into_iter().map(|i| kept[i]).collect()
    } else {
        kept.iter().cycle().take(cfg.points).copied().collect()
    })
}

/// [`sample_surface`] followed by [`normalize_points`].
pub fn sample_point_cloud<F: Real>(
    assembly: &SolidAssembly<F>,
    cfg: &SampleConfig,
) -> Result<PointCloud<F>, GeometryError> {
    let mut points = sample_surface(assembly, cfg)?;
    normalize_points(&mut points);
    Ok(PointCloud { points, seed: cfg.seed })
}
