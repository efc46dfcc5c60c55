use serde::{Deserialize, Serialize};

use crate::scalar::Real;

use super::mesh::TriangleMesh;
use super::vec3::{self, P3};
use super::GeometryError;

/// Orthographic camera for previews. The view always fits the mesh bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraConfig {
    pub width: u32,
    pub height: u32,
    /// Viewing direction, from the camera into the scene.
    pub direction: [f64; 3],
    pub up: [f64; 3],
    /// Fraction of the viewport left empty on each side.
    pub margin: f64,
    pub clear_color: [u8; 3],
    pub solid_color: [u8; 3],
    pub subtractive_color: [u8; 3],
}

impl Default for CameraConfig {
    fn default() -> Self {
        CameraConfig {
            width: 256,
            height: 256,
            direction: [-1.0, -1.0, -1.0],
            up: [0.0, 0.0, 1.0],
            margin: 0.05,
            clear_color: [255, 255, 255],
            solid_color: [120, 150, 200],
            subtractive_color: [220, 90, 80],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: u32,
    pub height: u32,
    /// Row-major RGB triples.
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Pixels differing from `background`.
    pub fn foreground_count(&self, background: [u8; 3]) -> usize {
        self.data.chunks_exact(3).filter(|px| *px != background).count()
    }

    pub fn to_png(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut buf, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            let mut writer = enc.write_header().expect("in-memory PNG header");
            writer.write_image_data(&self.data).expect("in-memory PNG data");
        }
        buf
    }
}

struct Raster {
    width: usize,
    height: usize,
    color: Vec<[f64; 3]>,
    depth: Vec<f64>,
}

impl Raster {
    fn fill(&mut self, tri: [(f64, f64, f64); 3], color: [f64; 3], alpha: f64, write_depth: bool) {
        let [a, b, c] = tri;
        let area = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
        if area.abs() < 1e-12 {
            return;
        }
        let min_x = a.0.min(b.0).min(c.0).floor().max(0.0) as usize;
        let max_x = (a.0.max(b.0).max(c.0).ceil() as usize).min(self.width);
        let min_y = a.1.min(b.1).min(c.1).floor().max(0.0) as usize;
        let max_y = (a.1.max(b.1).max(c.1).ceil() as usize).min(self.height);
        for y in min_y..max_y {
            for x in min_x..max_x {
                let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
                let w0 = ((b.0 - px) * (c.1 - py) - (b.1 - py) * (c.0 - px)) / area;
                let w1 = ((c.0 - px) * (a.1 - py) - (c.1 - py) * (a.0 - px)) / area;
                let w2 = 1.0 - w0 - w1;
                if w0 < 0.0 || w1 < 0.0 || w2 < 0.0 {
                    continue;
                }
                let z = w0 * a.2 + w1 * b.2 + w2 * c.2;
                let i = y * self.width + x;
                if z >= self.depth[i] {
                    continue;
                }
                if write_depth {
                    self.depth[i] = z;
                }
                let old = self.color[i];
                self.color[i] = [0, 1, 2].map(|k| old[k] * (1.0 - alpha) + color[k] * alpha);
            }
        }
    }
}

/// Flat-shaded orthographic raster of a mesh.
///
/// Additive primitives are opaque; cut and intersect primitives are blended
/// on top without writing depth. Output is deterministic for a fixed input.
pub fn render_preview<F: Real>(mesh: &TriangleMesh<F>, camera: &CameraConfig) -> Result<RgbImage, GeometryError> {
    if camera.width == 0 || camera.height == 0 {
        return Err(GeometryError::ZeroAreaViewport);
    }
    if mesh.is_empty() {
        return Err(GeometryError::EmptyMesh);
    }
    let forward = vec3::normalize(camera.direction);
    let right = vec3::normalize(vec3::cross(forward, camera.up));
    let up = vec3::cross(right, forward);
    let light = vec3::normalize([-forward[0] + 0.3, -forward[1] - 0.2, -forward[2] + 0.4]);

    let verts: Vec<P3<f64>> = mesh.vertices.iter().map(|v| v.map(|c| c.as_f64())).collect();
    let projected: Vec<(f64, f64, f64)> =
        verts.iter().map(|&v| (vec3::dot(v, right), vec3::dot(v, up), vec3::dot(v, forward))).collect();
    let (mut lo, mut hi) = ((f64::INFINITY, f64::INFINITY), (f64::NEG_INFINITY, f64::NEG_INFINITY));
    for &(x, y, _) in &projected {
        lo = (lo.0.min(x), lo.1.min(y));
        hi = (hi.0.max(x), hi.1.max(y));
    }
    let (w, h) = (camera.width as f64, camera.height as f64);
    let usable = 1.0 - 2.0 * camera.margin;
    let span = ((hi.0 - lo.0) / (w * usable)).max((hi.1 - lo.1) / (h * usable)).max(1e-12);
    let center = ((lo.0 + hi.0) / 2.0, (lo.1 + hi.1) / 2.0);
    let to_screen = |(x, y, z): (f64, f64, f64)| (w / 2.0 + (x - center.0) / span, h / 2.0 - (y - center.1) / span, z);

    let clear = camera.clear_color.map(f64::from);
    let mut raster = Raster {
        width: camera.width as usize,
        height: camera.height as usize,
        color: vec![clear; (camera.width * camera.height) as usize],
        depth: vec![f64::INFINITY; (camera.width * camera.height) as usize],
    };
    for pass_subtractive in [false, true] {
        for (tri, tag) in mesh.triangles.iter().zip(&mesh.tags) {
            if tag.is_subtractive() != pass_subtractive {
                continue;
            }
            let [a, b, c] = tri.map(|i| verts[i as usize]);
            let normal = vec3::normalize(vec3::cross(vec3::sub(b, a), vec3::sub(c, a)));
            let shade = 0.35 + 0.65 * vec3::dot(normal, light).abs();
            let (base, alpha) =
                if pass_subtractive { (camera.subtractive_color, 0.5) } else { (camera.solid_color, 1.0) };
            let color = base.map(|c| f64::from(c) * shade);
            let screen = tri.map(|i| to_screen(projected[i as usize]));
            raster.fill(screen, color, alpha, !pass_subtractive);
        }
    }
    let data = raster.color.iter().flat_map(|c| c.map(|v| v.round().clamp(0.0, 255.0) as u8)).collect();
    Ok(RgbImage { width: camera.width, height: camera.height, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cad_seq::{CadModel, Extrusion, Loop, SePair};
    use crate::geometry::{assemble, mesh};

    fn cube_mesh(origin: [u8; 3]) -> TriangleMesh<f64> {
        let m = CadModel {
            ses: vec![SePair::simple(
                Loop::rectangle(64, 64, 192, 192),
                Extrusion { theta: 0, dist_pos: 255, origin, ..Extrusion::default() },
            )],
        };
        mesh(&assemble(&m).unwrap()).unwrap()
    }

    #[test]
    fn cube_is_visible_on_clear_background() {
        let cam = CameraConfig::default();
        let img = render_preview(&cube_mesh([128, 128, 128]), &cam).unwrap();
        assert!(img.foreground_count(cam.clear_color) > 1000);
        assert_eq!(img.pixel(0, 0), cam.clear_color);
        let png = img.to_png();
        assert_eq!(&png[1..4], b"PNG");
    }

    #[test]
    fn rendering_is_deterministic() {
        let cam = CameraConfig::default();
        let mesh = cube_mesh([128, 128, 128]);
        assert_eq!(render_preview(&mesh, &cam).unwrap(), render_preview(&mesh, &cam).unwrap());
    }

    #[test]
    fn translation_keeps_silhouette_area() {
        let cam = CameraConfig::default();
        let a = render_preview(&cube_mesh([128, 128, 128]), &cam).unwrap().foreground_count(cam.clear_color);
        let b = render_preview(&cube_mesh([40, 200, 90]), &cam).unwrap().foreground_count(cam.clear_color);
        let diff = (a as f64 - b as f64).abs() / a as f64;
        assert!(diff < 0.005, "{a} vs {b}");
    }

    #[test]
    fn zero_viewport_and_empty_mesh() {
        let cam = CameraConfig { width: 0, ..CameraConfig::default() };
        assert_eq!(render_preview(&cube_mesh([128; 3]), &cam).unwrap_err(), GeometryError::ZeroAreaViewport);
        let empty = TriangleMesh::<f64>::default();
        assert_eq!(render_preview(&empty, &CameraConfig::default()).unwrap_err(), GeometryError::EmptyMesh);
    }
}
