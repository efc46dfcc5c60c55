use crate::cad_seq::{validate, BoolOp, CadModel, Extent, Extrusion, ValidationConfig};
use crate::scalar::Real;

use super::dequant;
use super::profile::{build_profile_at, Profile2D};
use super::vec3::{self, P3};
use super::GeometryError;

/// Sketch plane placement: orthonormal right-handed axes, origin and uniform scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame<F> {
    pub origin: P3<F>,
    pub x_axis: P3<F>,
    pub y_axis: P3<F>,
    pub normal: P3<F>,
    pub scale: F,
}

impl<F: Real> Frame<F> {
    pub fn from_extrusion(e: &Extrusion) -> Self {
        let theta: F = dequant::theta(e.theta);
        let phi: F = dequant::angle(e.phi);
        let gamma: F = dequant::angle(e.gamma);
        let normal = [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()];
        let x0 = [theta.cos() * phi.cos(), theta.cos() * phi.sin(), -theta.sin()];
        let y0 = vec3::cross(normal, x0);
        let x_axis = vec3::add(vec3::scale(x0, gamma.cos()), vec3::scale(y0, gamma.sin()));
        let y_axis = vec3::cross(normal, x_axis);
        Frame { origin: e.origin.map(dequant::coord), x_axis, y_axis, normal, scale: dequant::scale(e.scale) }
    }

    /// Sketch-plane coordinates and signed height of a world point.
    pub fn to_local(&self, p: P3<F>) -> (F, F, F) {
        let q = vec3::sub(p, self.origin);
        (vec3::dot(q, self.x_axis) / self.scale, vec3::dot(q, self.y_axis) / self.scale, vec3::dot(q, self.normal))
    }

    pub fn to_world(&self, u: F, v: F, w: F) -> P3<F> {
        let in_plane = vec3::add(vec3::scale(self.x_axis, u * self.scale), vec3::scale(self.y_axis, v * self.scale));
        vec3::add(self.origin, vec3::add(in_plane, vec3::scale(self.normal, w)))
    }
}

/// An extruded profile with its boolean role.
#[derive(Debug, Clone, PartialEq)]
pub struct Prism<F> {
    pub profile: Profile2D<F>,
    pub frame: Frame<F>,
    /// Extent along the normal in world units, `z_min < z_max`.
    pub z_min: F,
    pub z_max: F,
    pub op: BoolOp,
    pub se_index: usize,
}

impl<F: Real> Prism<F> {
    pub fn contains(&self, p: P3<F>) -> bool {
        let (u, v, w) = self.frame.to_local(p);
        w >= self.z_min && w <= self.z_max && self.profile.contains([u, v])
    }

    pub fn height(&self) -> F {
        self.z_max - self.z_min
    }

    /// World-space bounding box of the prism.
    pub fn bounds(&self) -> (P3<F>, P3<F>) {
        let corners = self
            .profile
            .faces
            .iter()
            .flat_map(|f| f.outer.iter())
            .flat_map(|p| [self.z_min, self.z_max].map(|w| self.frame.to_world(p[0], p[1], w)));
        vec3::bounds(corners).expect("profiles are non-empty")
    }
}

/// Ordered primitives; solid membership folds their boolean ops left to right.
#[derive(Debug, Clone, PartialEq)]
pub struct SolidAssembly<F> {
    pub primitives: Vec<Prism<F>>,
}

impl<F: Real> SolidAssembly<F> {
    pub fn contains(&self, p: P3<F>) -> bool {
        self.primitives.iter().fold(false, |inside, prim| match prim.op {
            BoolOp::New | BoolOp::Join => inside || prim.contains(p),
            BoolOp::Cut => inside && !prim.contains(p),
            BoolOp::Intersect => inside && prim.contains(p),
        })
    }

    /// Bounds of the additive primitives, a superset of the solid.
    pub fn bounds(&self) -> Option<(P3<F>, P3<F>)> {
        let boxes = self.primitives.iter().filter(|p| matches!(p.op, BoolOp::New | BoolOp::Join)).flat_map(|p| {
            let (lo, hi) = p.bounds();
            [lo, hi]
        });
        vec3::bounds(boxes)
    }
}

/// Extrusion interval along the normal, before ordering.
fn extent_interval<F: Real>(e: &Extrusion, scale: F) -> (F, F) {
    let pos = dequant::distance::<F>(e.dist_pos) * scale;
    let neg = dequant::distance::<F>(e.dist_neg) * scale;
    match e.extent {
        Extent::One => (F::zero(), pos),
        Extent::Sym => (-pos / F::lit(2.0), pos / F::lit(2.0)),
        Extent::Two => (-neg, pos),
    }
}

/// Builds one prism per SE pair.
pub fn assemble<F: Real>(model: &CadModel) -> Result<SolidAssembly<F>, GeometryError> {
    let report = validate(model, &ValidationConfig::UNBOUNDED);
    if !report.is_valid {
        return Err(GeometryError::InvalidModel(report.errors.iter().map(|e| e.code).collect()));
    }
    let mut primitives = Vec::with_capacity(model.ses.len());
    for (i, se) in model.ses.iter().enumerate() {
        let profile = build_profile_at(&se.sketch, &format!("ses[{i}].sketch"))?;
        let frame = Frame::from_extrusion(&se.extrusion);
        let (a, b) = extent_interval(&se.extrusion, frame.scale);
        let (z_min, z_max) = if a <= b { (a, b) } else { (b, a) };
        if z_max - z_min <= F::lit(1e-9) || frame.scale <= F::zero() {
            return Err(GeometryError::DegenerateExtrusion { se: i });
        }
        primitives.push(Prism { profile, frame, z_min, z_max, op: se.extrusion.op, se_index: i });
    }
    Ok(SolidAssembly { primitives })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cad_seq::{parse, Loop, SePair};

    fn ext(op: BoolOp, dist_pos: u8) -> Extrusion {
        Extrusion { theta: 0, op, dist_pos, ..Extrusion::default() }
    }

    fn model(ses: Vec<SePair>) -> CadModel {
        CadModel { ses }
    }

    #[test]
    fn frame_is_orthonormal_and_right_handed() {
        for &(t, p, g) in &[(0u8, 128u8, 128u8), (77, 3, 250), (255, 0, 0), (128, 200, 31)] {
            let e = Extrusion { theta: t, phi: p, gamma: g, ..Extrusion::default() };
            let f = Frame::<f64>::from_extrusion(&e);
            for a in [f.x_axis, f.y_axis, f.normal] {
                assert!((vec3::norm(a) - 1.0).abs() < 1e-12);
            }
            assert!(vec3::dot(f.x_axis, f.y_axis).abs() < 1e-12);
            let z = vec3::cross(f.x_axis, f.y_axis);
            assert!(vec3::dist2(z, f.normal) < 1e-20);
            let (u, v, w) = f.to_local(f.to_world(0.3, -0.2, 0.7));
            assert!((u - 0.3).abs() < 1e-12 && (v + 0.2).abs() < 1e-12 && (w - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_square_prism_half_height() {
        let m = model(vec![SePair::simple(Loop::rectangle(64, 64, 192, 192), ext(BoolOp::New, 192))]);
        let a = assemble::<f64>(&m).unwrap();
        let prim = &a.primitives[0];
        assert_eq!(prim.frame.scale, 1.0);
        assert_eq!((prim.z_min, prim.z_max), (0.0, 0.5));
        assert_eq!(prim.profile.area(), 1.0);
        let f = prim.frame;
        assert!(a.contains(f.to_world(0.0, 0.0, 0.25)));
        assert!(!a.contains(f.to_world(0.0, 0.0, 0.6)));
        assert!(!a.contains(f.to_world(0.6, 0.0, 0.25)));
    }

    #[test]
    fn extent_rules() {
        let square = Loop::rectangle(64, 64, 192, 192);
        let mut e = ext(BoolOp::New, 192);
        e.dist_neg = 96;
        e.extent = Extent::Sym;
        let a = assemble::<f64>(&model(vec![SePair::simple(square.clone(), e)])).unwrap();
        assert_eq!((a.primitives[0].z_min, a.primitives[0].z_max), (-0.25, 0.25));
        e.extent = Extent::Two;
        let a = assemble::<f64>(&model(vec![SePair::simple(square.clone(), e)])).unwrap();
        assert_eq!((a.primitives[0].z_min, a.primitives[0].z_max), (0.25, 0.5));
        e.dist_neg = 160;
        let a = assemble::<f64>(&model(vec![SePair::simple(square, e)])).unwrap();
        assert_eq!((a.primitives[0].z_min, a.primitives[0].z_max), (-0.25, 0.5));
    }

    #[test]
    fn zero_distance_is_degenerate() {
        let m = model(vec![SePair::simple(Loop::rectangle(64, 64, 192, 192), ext(BoolOp::New, 128))]);
        assert_eq!(assemble::<f64>(&m).unwrap_err(), GeometryError::DegenerateExtrusion { se: 0 });
    }

    #[test]
    fn cut_cylinder_from_cube() {
        // cube of side 1 from z = -0.5 to 0.5, cylinder radius 0.25 through it
        let cube = SePair::simple(
            Loop::rectangle(64, 64, 192, 192),
            Extrusion { extent: Extent::Sym, ..ext(BoolOp::New, 255) },
        );
        let hole =
            SePair::simple(Loop::circle(128, 128, 32), Extrusion { extent: Extent::Sym, ..ext(BoolOp::Cut, 255) });
        let a = assemble::<f64>(&model(vec![cube, hole])).unwrap();
        let f = a.primitives[0].frame;
        assert!(!a.contains(f.to_world(0.0, 0.0, 0.0)));
        assert!(a.contains(f.to_world(0.45, 0.45, 0.0)));
        assert!(a.contains(f.to_world(-0.45, 0.45, 0.4)));
    }

    #[test]
    fn disjoint_join_keeps_both() {
        let left = SePair::simple(Loop::rectangle(10, 10, 60, 60), ext(BoolOp::New, 192));
        let right = SePair::simple(Loop::rectangle(150, 150, 200, 200), ext(BoolOp::Join, 192));
        let a = assemble::<f64>(&model(vec![left, right])).unwrap();
        let f = a.primitives[0].frame;
        let in_left = f.to_world(dequant::coord(35), dequant::coord(35), 0.1);
        let in_right = f.to_world(dequant::coord(175), dequant::coord(175), 0.1);
        assert!(a.contains(in_left) && a.contains(in_right));
        assert!(!a.contains(f.to_world(0.0, 0.0, 0.1)));
    }

    #[test]
    fn intersect_keeps_overlap_only() {
        let a_box = SePair::simple(Loop::rectangle(64, 64, 160, 160), ext(BoolOp::New, 192));
        let b_box = SePair::simple(Loop::rectangle(128, 128, 192, 192), ext(BoolOp::Intersect, 192));
        let a = assemble::<f64>(&model(vec![a_box, b_box])).unwrap();
        let f = a.primitives[0].frame;
        assert!(a.contains(f.to_world(0.1, 0.1, 0.1)));
        assert!(!a.contains(f.to_world(-0.3, -0.3, 0.1)));
    }

    #[test]
    fn invalid_model_is_rejected() {
        let m = parse("sketch face loop line 1 1 line 2 2 extrude theta 0 phi 0 gamma 0 origin 0 0 0 scale 1 dist 200 128 op new ext one <eom>").unwrap();
        assert!(matches!(assemble::<f64>(&m), Err(GeometryError::InvalidModel(_))));
    }
}
