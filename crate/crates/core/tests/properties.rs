//! Property tests of the grammar, masking and metric kernels against
//! independent oracles.

use proptest::prelude::*;

use sketchedit_core::cad_seq::{
    parse, serialize, tokenize, BoolOp, CadModel, Curve, Extent, Extrusion, Face, Loop, SePair, Sketch,
};
use sketchedit_core::geometry::P3;
use sketchedit_core::masking::{gt_mask_with_fills, lcs, make_gt_mask, realize, verify_consistency};
use sketchedit_core::metrics::{chamfer, jsd_distributions};
use sketchedit_core::variation::{perturb, random_model};

fn curve() -> impl Strategy<Value = Curve> {
    prop_oneof![
        (any::<u8>(), any::<u8>()).prop_map(|(x, y)| Curve::Line { x, y }),
        (any::<u8>(), any::<u8>(), any::<u8>(), any::<u8>()).prop_map(|(x, y, mid_x, mid_y)| Curve::Arc {
            x,
            y,
            mid_x,
            mid_y
        }),
    ]
}

fn grammar_loop() -> impl Strategy<Value = Loop> {
    prop_oneof![
        (any::<u8>(), any::<u8>(), 1u8..).prop_map(|(cx, cy, r)| Loop { curves: vec![Curve::Circle { cx, cy, r }] }),
        prop::collection::vec(curve(), 1..6).prop_map(|curves| Loop { curves }),
    ]
}

fn extrusion() -> impl Strategy<Value = Extrusion> {
    (
        (any::<u8>(), any::<u8>(), any::<u8>()),
        any::<[u8; 3]>(),
        (any::<u8>(), any::<u8>(), any::<u8>()),
        prop::sample::select(BoolOp::ALL.to_vec()),
        prop::sample::select(vec![Extent::One, Extent::Sym, Extent::Two]),
    )
        .prop_map(|((theta, phi, gamma), origin, (scale, dist_pos, dist_neg), op, extent)| Extrusion {
            theta,
            phi,
            gamma,
            origin,
            scale,
            dist_pos,
            dist_neg,
            op,
            extent,
        })
}

/// Any grammatical model, valid or not.
fn model() -> impl Strategy<Value = CadModel> {
    let face = prop::collection::vec(grammar_loop(), 1..3).prop_map(|loops| Face { loops });
    let se = (prop::collection::vec(face, 1..3), extrusion())
        .prop_map(|(faces, extrusion)| SePair { sketch: Sketch { faces }, extrusion });
    prop::collection::vec(se, 1..4).prop_map(|ses| CadModel { ses })
}

/// Exhaustive LCS length: the longest subsequence of `a` that is a subsequence of `b`.
fn lcs_oracle(a: &[String], b: &[String]) -> usize {
    let is_subseq = |s: &[&String]| {
        let mut it = b.iter();
        s.iter().all(|x| it.any(|y| y == *x))
    };
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let picked: Vec<&String> = a.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, t)| t).collect();
        if picked.len() > best && is_subseq(&picked) {
            best = picked.len();
        }
    }
    best
}

fn symbols(max: usize) -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d"]), 0..=max)
        .prop_map(|v| v.into_iter().map(String::from).collect())
}

fn brute_chamfer(a: &[P3<f64>], b: &[P3<f64>]) -> f64 {
    let d2 = |p: &P3<f64>, q: &P3<f64>| {
        let (x, y, z) = (p[0] - q[0], p[1] - q[1], p[2] - q[2]);
        x * x + y * y + z * z
    };
    let directed = |from: &[P3<f64>], to: &[P3<f64>]| {
        let mut sum = 0.0;
        for p in from {
            sum += to.iter().map(|q| d2(p, q)).fold(f64::INFINITY, f64::min);
        }
        sum / from.len() as f64
    };
    directed(a, b) + directed(b, a)
}

fn cloud() -> impl Strategy<Value = Vec<P3<f64>>> {
    prop::collection::vec(prop::array::uniform3(-0.5f64..0.5), 1..=20)
}

fn histogram() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0u32..50, 1..40).prop_filter("non-empty", |v| v.iter().any(|&c| c > 0)).prop_map(|v| {
        let total: u32 = v.iter().sum();
        v.into_iter().map(|c| f64::from(c) / f64::from(total)).collect()
    })
}

fn jsd_oracle(p: &[f64], q: &[f64]) -> f64 {
    let mut total = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        let m = (a + b) / 2.0;
        if a > 0.0 {
            total += 0.5 * a * (a / m).ln();
        }
        if b > 0.0 {
            total += 0.5 * b * (b / m).ln();
        }
    }
    total / std::f64::consts::LN_2
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn serialize_parse_round_trip(m in model()) {
        let text = serialize(&m);
        prop_assert_eq!(parse(&text).unwrap(), m);
        prop_assert_eq!(serialize(&parse(&text).unwrap()), text);
    }

    #[test]
    fn lcs_length_matches_enumeration(a in symbols(12), b in symbols(12)) {
        let al = lcs(&a, &b);
        prop_assert_eq!(al.pairs.len(), lcs_oracle(&a, &b));
        for w in al.pairs.windows(2) {
            prop_assert!(w[0].0 < w[1].0 && w[0].1 < w[1].1);
        }
        for &(i, j) in &al.pairs {
            prop_assert_eq!(&a[i], &b[j]);
        }
    }

    #[test]
    fn gt_mask_is_consistent_and_realizable(a in symbols(16), b in symbols(16)) {
        let (masked, fills) = gt_mask_with_fills(&a, &b);
        prop_assert!(verify_consistency(&a, &masked));
        prop_assert_eq!(realize(&masked, &fills).unwrap().to_vec(), b);
    }

    #[test]
    fn chamfer_matches_brute_force(a in cloud(), b in cloud()) {
        prop_assert_eq!(chamfer(&a, &b).unwrap(), brute_chamfer(&a, &b));
    }

    #[test]
    fn jsd_matches_direct_formula(p in histogram(), q in histogram()) {
        let n = p.len().min(q.len());
        let renorm = |v: &[f64]| {
            let s: f64 = v[..n].iter().sum();
            if s == 0.0 { None } else { Some(v[..n].iter().map(|x| x / s).collect::<Vec<_>>()) }
        };
        if let (Some(p), Some(q)) = (renorm(&p), renorm(&q)) {
            let v = jsd_distributions(&p, &q).unwrap();
            prop_assert!((v - jsd_oracle(&p, &q)).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn mask_realizes_model_edits(seed in any::<u64>()) {
        let base = random_model(seed);
        if let Ok((edited, _)) = perturb(&base, seed, None) {
            let (o, e) = (tokenize(&serialize(&base)), tokenize(&serialize(&edited)));
            let (masked, fills) = gt_mask_with_fills(&o, &e);
            prop_assert_eq!(masked.clone(), make_gt_mask(&o, &e));
            prop_assert!(verify_consistency(&o, &masked));
            prop_assert_eq!(realize(&masked, &fills).unwrap(), e);
        }
    }
}

#[test]
fn seeded_dataset_models_round_trip() {
    for seed in 0..200 {
        let m = random_model(seed);
        assert_eq!(parse(&serialize(&m)).unwrap(), m, "seed {seed}");
    }
}
