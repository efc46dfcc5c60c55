//! Text-based editing of sketch-and-extrude CAD models: the sequence grammar,
//! a geometry kernel, LCS-derived masks, variation and captioning for triplet
//! synthesis, the locate-then-infill editing pipeline, evaluation metrics and
//! persisted editing sessions.

pub mod cad_seq;
pub mod captioning;
pub mod geometry;
pub mod masking;
pub mod metrics;
pub mod pipeline;
pub mod scalar;
pub mod session;
pub mod variation;

pub type PointCloudF64 = geometry::PointCloud<f64>;
pub type SolidAssemblyF64 = geometry::SolidAssembly<f64>;
pub type TriangleMeshF64 = geometry::TriangleMesh<f64>;
pub type Profile2DF64 = geometry::Profile2D<f64>;
pub type PrismF64 = geometry::Prism<f64>;
pub type P3F64 = geometry::P3<f64>;
