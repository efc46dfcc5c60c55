use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cad_seq::{
    validate, BoolOp, CadModel, Curve, Extent, Extrusion, Face, Loop, SePair, Sketch, ValidationConfig,
};
use crate::geometry::is_renderable;

use super::PrimitiveClass;

/// Sketch-plane orientations `(theta, phi, gamma)` used by generated models.
const ORIENTATIONS: [(u8, u8, u8); 3] = [(0, 128, 128), (128, 128, 128), (128, 191, 128)];

/// Inclusive quantized bounding box `(x0, y0, x1, y1)` with `x0 < x1`, `y0 < y1`.
pub type QBox = (u8, u8, u8, u8);

/// Loop of the given class filling `bbox`. `None` when the box is too small
/// for the shape to have distinct vertices.
pub fn shape_in_bbox(class: PrimitiveClass, (x0, y0, x1, y1): QBox) -> Option<Loop> {
    let (w, h) = (x1.checked_sub(x0)?, y1.checked_sub(y0)?);
    if w < 4 || h < 4 {
        return None;
    }
    let (xm, ym) = (x0 + w / 2, y0 + h / 2);
    Some(match class {
        PrimitiveClass::Cylinder => Loop::circle(xm, ym, w.min(h) / 2),
        PrimitiveClass::Block => Loop::rectangle(x0, y0, x1, y1),
        PrimitiveClass::Prism => Loop::polygon(&[(x0, y0), (x1, y0), (x1, ym), (xm, ym), (xm, y1), (x0, y1)]),
        PrimitiveClass::RoundedPrism => {
            let bulge = (w / 3).min(h / 2).max(1);
            let xr = x1 - bulge;
            Loop {
                curves: vec![
                    Curve::Line { x: xr, y: y0 },
                    Curve::Arc { x: xr, y: y1, mid_x: x1, mid_y: ym },
                    Curve::Line { x: x0, y: y1 },
                    Curve::Line { x: x0, y: y0 },
                ],
            }
        }
    })
}

/// Quantized bounding box of a loop, including arc midpoints.
pub fn loop_bbox(lp: &Loop) -> QBox {
    let mut pts = Vec::new();
    for c in &lp.curves {
        match *c {
            Curve::Line { x, y } => pts.push((x, y)),
            Curve::Arc { x, y, mid_x, mid_y } => pts.extend([(x, y), (mid_x, mid_y)]),
            Curve::Circle { cx, cy, r } => {
                pts.extend([(cx.saturating_sub(r), cy.saturating_sub(r)), (cx.saturating_add(r), cy.saturating_add(r))])
            }
        }
    }
    let x0 = pts.iter().map(|p| p.0).min().unwrap_or(0);
    let x1 = pts.iter().map(|p| p.0).max().unwrap_or(0);
    let y0 = pts.iter().map(|p| p.1).min().unwrap_or(0);
    let y1 = pts.iter().map(|p| p.1).max().unwrap_or(0);
    (x0, y0, x1, y1)
}

fn random_class(rng: &mut ChaCha8Rng) -> PrimitiveClass {
    *PrimitiveClass::ALL.choose(rng).expect("non-empty")
}

fn random_box(rng: &mut ChaCha8Rng, within: QBox, min_size: u8) -> QBox {
    let (x0, y0, x1, y1) = within;
    let w = rng.gen_range(min_size..=(x1 - x0).max(min_size));
    let h = rng.gen_range(min_size..=(y1 - y0).max(min_size));
    let bx = rng.gen_range(x0..=x1.saturating_sub(w).max(x0));
    let by = rng.gen_range(y0..=y1.saturating_sub(h).max(y0));
    (bx, by, bx.saturating_add(w), by.saturating_add(h))
}

fn base_extrusion(rng: &mut ChaCha8Rng) -> Extrusion {
    let (theta, phi, gamma) = *ORIENTATIONS.choose(rng).expect("non-empty");
    let extent = if rng.gen_bool(0.8) { Extent::One } else { Extent::Sym };
    Extrusion {
        theta,
        phi,
        gamma,
        origin: [rng.gen_range(96..=160), rng.gen_range(96..=160), rng.gen_range(96..=160)],
        scale: *[112u8, 128, 144].choose(rng).expect("non-empty"),
        dist_pos: 128 + *[32u8, 48, 64, 96].choose(rng).expect("non-empty"),
        dist_neg: 128,
        op: BoolOp::New,
        extent,
    }
}

fn base_se(rng: &mut ChaCha8Rng) -> Option<SePair> {
    let bbox = random_box(rng, (40, 40, 216, 216), 64);
    let class = random_class(rng);
    let outer = shape_in_bbox(class, bbox)?;
    let mut loops = vec![outer];
    if class == PrimitiveClass::Block && rng.gen_bool(0.3) {
        let (x0, y0, x1, y1) = bbox;
        let r = ((x1 - x0).min(y1 - y0) / 5).max(2);
        loops.push(Loop::circle(x0 + (x1 - x0) / 2, y0 + (y1 - y0) / 2, r));
    }
    Some(SePair { sketch: Sketch { faces: vec![Face { loops }] }, extrusion: base_extrusion(rng) })
}

/// A join or cut SE pair on the base's sketch plane, overlapping its outer loop.
pub fn extra_se(rng: &mut ChaCha8Rng, base: &SePair) -> Option<SePair> {
    let outer = base.outer_loop()?;
    let (x0, y0, x1, y1) = loop_bbox(outer);
    let op = if rng.gen_bool(0.5) { BoolOp::Join } else { BoolOp::Cut };
    let bbox = match op {
        BoolOp::Cut => {
            let inset = ((x1 - x0).min(y1 - y0) / 5).max(1);
            random_box(rng, (x0 + inset, y0 + inset, x1 - inset, y1 - inset), 12)
        }
        _ => {
            let cx = rng.gen_range(x0..=x1);
            let cy = rng.gen_range(y0..=y1);
            let half = rng.gen_range(12u8..=40);
            (
                cx.saturating_sub(half).max(16),
                cy.saturating_sub(half).max(16),
                cx.saturating_add(half).min(240),
                cy.saturating_add(half).min(240),
            )
        }
    };
    let class = random_class(rng);
    let lp = shape_in_bbox(class, bbox)?;
    let mut extrusion = base.extrusion;
    extrusion.op = op;
    extrusion.dist_pos = match op {
        BoolOp::Cut => base.extrusion.dist_pos.max(192),
        _ => 128 + *[32u8, 48, 64, 80].choose(rng).expect("non-empty"),
    };
    if op == BoolOp::Cut {
        extrusion.extent = Extent::Sym;
    }
    Some(SePair::simple(lp, extrusion))
}

/// Seeded random model with one to three SE pairs that validates under the
/// dataset limits and assembles into a non-empty solid.
pub fn random_model(seed: u64) -> CadModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let Some(base) = base_se(&mut rng) else { continue };
        let mut model = CadModel { ses: vec![base] };
        let extras = rng.gen_range(0..=2);
        for _ in 0..extras {
            if let Some(se) = extra_se(&mut rng, &model.ses[0]) {
                model.ses.push(se);
            }
        }
        if validate(&model, &ValidationConfig::DATASET).is_valid && is_renderable::<f64>(&model, 32) {
            return model;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_profile;

    #[test]
    fn shapes_fill_their_box() {
        for class in PrimitiveClass::ALL {
            let lp = shape_in_bbox(class, (64, 64, 192, 160)).unwrap();
            assert_eq!(PrimitiveClass::of_loop(&lp), class);
            let sketch = Sketch { faces: vec![Face { loops: vec![lp.clone()] }] };
            assert!(build_profile::<f64>(&sketch).is_ok(), "{class:?}");
            let (x0, y0, x1, y1) = loop_bbox(&lp);
            assert!(x0 >= 64 && y0 >= 64 && x1 <= 192 && y1 <= 160);
        }
        assert!(shape_in_bbox(PrimitiveClass::Block, (10, 10, 12, 40)).is_none());
    }

    #[test]
    fn random_models_are_valid_and_deterministic() {
        for seed in 0..20 {
            let m = random_model(seed);
            assert!(validate(&m, &ValidationConfig::DATASET).is_valid);
            assert!((1..=3).contains(&m.ses.len()));
            assert_eq!(m, random_model(seed));
        }
        assert_ne!(random_model(1), random_model(2));
    }
}
