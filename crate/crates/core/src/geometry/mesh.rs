use crate::cad_seq::BoolOp;
use crate::scalar::Real;

use super::assembly::SolidAssembly;
use super::vec3::P3;
use super::GeometryError;

/// Provenance of a triangle: which SE pair produced it and with what boolean role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TriangleTag {
    pub primitive: usize,
    pub op: BoolOp,
}

impl TriangleTag {
    /// Subtractive primitives are drawn translucent by viewers.
    pub fn is_subtractive(&self) -> bool {
        matches!(self.op, BoolOp::Cut | BoolOp::Intersect)
    }
}

/// Concatenated per-primitive prism meshes. Booleans are not evaluated.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh<F> {
    pub vertices: Vec<P3<F>>,
    pub triangles: Vec<[u32; 3]>,
    /// One tag per triangle.
    pub tags: Vec<TriangleTag>,
}

impl<F: Real> TriangleMesh<F> {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }
}

/// Meshes every primitive of the assembly as a closed prism with triangulated caps.
pub fn mesh<F: Real>(assembly: &SolidAssembly<F>) -> Result<TriangleMesh<F>, GeometryError> {
    let mut out = TriangleMesh::default();
    for (pi, prim) in assembly.primitives.iter().enumerate() {
        let tag = TriangleTag { primitive: pi, op: prim.op };
        for face in &prim.profile.faces {
            let base = out.vertices.len();
            let rings: Vec<&Vec<[F; 2]>> = face.rings().collect();
            let ring_count: usize = rings.iter().map(|r| r.len()).sum();

            // bottom ring vertices followed by top ring vertices, ring by ring
            for w in [prim.z_min, prim.z_max] {
                for ring in &rings {
                    out.vertices.extend(ring.iter().map(|p| prim.frame.to_world(p[0], p[1], w)));
                }
            }

            let mut flat = Vec::with_capacity(ring_count * 2);
            let mut hole_starts = Vec::new();
            for (ri, ring) in rings.iter().enumerate() {
                if ri > 0 {
                    hole_starts.push(flat.len() / 2);
                }
                flat.extend(ring.iter().flat_map(|p| [p[0].as_f64(), p[1].as_f64()]));
            }
            let cap = earcutr::earcut(&flat, &hole_starts, 2)
                .map_err(|_| GeometryError::Triangulation { se: prim.se_index })?;
            let bottom = base as u32;
            let top = (base + ring_count) as u32;
            for t in cap.chunks_exact(3) {
                let (a, b, c) = (t[0] as u32, t[1] as u32, t[2] as u32);
                // earcut output winding is not guaranteed; orient caps from the profile normal
                let (a, b, c) = if cap_is_ccw(&flat, t) { (a, b, c) } else { (a, c, b) };
                out.triangles.push([bottom + a, bottom + c, bottom + b]);
                out.triangles.push([top + a, top + b, top + c]);
                out.tags.extend([tag, tag]);
            }

            let mut offset = 0u32;
            for ring in &rings {
                let n = ring.len() as u32;
                for i in 0..n {
                    let j = (i + 1) % n;
                    let (b0, b1) = (bottom + offset + i, bottom + offset + j);
                    let (t0, t1) = (top + offset + i, top + offset + j);
                    out.triangles.push([b0, b1, t1]);
                    out.triangles.push([b0, t1, t0]);
                    out.tags.extend([tag, tag]);
                }
                offset += n;
            }
        }
    }
    Ok(out)
}

fn cap_is_ccw(flat: &[f64], t: &[usize]) -> bool {
    let p = |i: usize| (flat[2 * t[i]], flat[2 * t[i] + 1]);
    let (a, b, c) = (p(0), p(1), p(2));
    (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0) >= 0.0
}
