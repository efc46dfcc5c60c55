//! Geometry kernel: sketch profiles, extruded primitives combined by point
//! membership, surface point clouds, triangle meshes and a software preview
//! renderer.
//!
//! Everything is generic over [`Real`](crate::scalar::Real); the crate root
//! exports `f64` aliases.

mod assembly;
mod export;
mod mesh;
mod profile;
mod render;
mod sample;
pub(crate) mod vec3;

use thiserror::Error;

pub use assembly::{assemble, Frame, Prism, SolidAssembly};
pub use export::{cloud_to_xyz, mesh_to_obj};
pub use mesh::{mesh, TriangleMesh, TriangleTag};
pub use profile::{build_profile, loop_polyline, FaceProfile, Profile2D, ARC_SEGMENTS, CIRCLE_SEGMENTS};
pub use render::{render_preview, CameraConfig, RgbImage};
pub use sample::{normalize_points, sample_point_cloud, sample_surface, PointCloud, SampleConfig};
pub use vec3::{P2, P3};

use crate::cad_seq::{CadModel, IssueCode};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("model violates its invariants: {0:?}")]
    InvalidModel(Vec<IssueCode>),
    #[error("loop {path} has zero area")]
    DegenerateLoop { path: String },
    #[error("loop {path} intersects itself")]
    SelfIntersecting { path: String },
    #[error("hole {path} is not inside its outer loop")]
    HoleOutsideOuter { path: String },
    #[error("SE pair {se} has zero extrusion distance")]
    DegenerateExtrusion { se: usize },
    #[error("solid has no surface")]
    EmptySolid,
    #[error("nothing to render")]
    EmptyMesh,
    #[error("viewport has zero area")]
    ZeroAreaViewport,
    #[error("cap triangulation failed for SE pair {se}")]
    Triangulation { se: usize },
}

/// Maps quantized values to continuous ones.
pub mod dequant {
    use crate::scalar::Real;

    /// Sketch coordinate `c` to `(c - 128) / 128`, in `[-1, 1)`.
    pub fn coord<F: Real>(c: u8) -> F {
        (F::from_u8(c).unwrap() - F::lit(128.0)) / F::lit(128.0)
    }

    /// Sketch scale `s` to `s / 128`, in `[0, 2)`.
    pub fn scale<F: Real>(s: u8) -> F {
        F::from_u8(s).unwrap() / F::lit(128.0)
    }

    /// Extrusion distance before scaling, `(d - 128) / 128`.
    pub fn distance<F: Real>(d: u8) -> F {
        coord(d)
    }

    /// Polar angle of the plane normal, `pi * t / 255`.
    pub fn theta<F: Real>(t: u8) -> F {
        F::PI() * F::from_u8(t).unwrap() / F::lit(255.0)
    }

    /// Azimuth and in-plane rotation, `2 pi v / 255 - pi`.
    pub fn angle<F: Real>(v: u8) -> F {
        F::TAU() * F::from_u8(v).unwrap() / F::lit(255.0) - F::PI()
    }
}

/// True when the model assembles and its surface can be sampled: the
/// "parsed and rendered" validity used by the valid ratio.
pub fn is_renderable<F: Real>(model: &CadModel, probe_points: usize) -> bool {
    assemble::<F>(model)
        .and_then(|a| sample_point_cloud(&a, &SampleConfig { points: probe_points, ..SampleConfig::default() }))
        .is_ok()
}
