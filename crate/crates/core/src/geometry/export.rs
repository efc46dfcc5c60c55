use std::fmt::Write as _;

use crate::scalar::Real;

use super::mesh::TriangleMesh;
use super::sample::PointCloud;

/// ASCII OBJ. Each primitive becomes a group named `se<index>_<op>`.
pub fn mesh_to_obj<F: Real>(mesh: &TriangleMesh<F>) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        writeln!(out, "v {} {} {}", v[0], v[1], v[2]).unwrap();
    }
    let mut group = None;
    for (tri, tag) in mesh.triangles.iter().zip(&mesh.tags) {
        if group != Some(tag.primitive) {
            writeln!(out, "g se{}_{}", tag.primitive, tag.op).unwrap();
            group = Some(tag.primitive);
        }
        writeln!(out, "f {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1).unwrap();
    }
    out
}

/// One `x y z` line per point.
pub fn cloud_to_xyz<F: Real>(cloud: &PointCloud<F>) -> String {
    let mut out = String::with_capacity(cloud.len() * 32);
    for p in &cloud.points {
        writeln!(out, "{} {} {}", p[0], p[1], p[2]).unwrap();
    }
    out
}
