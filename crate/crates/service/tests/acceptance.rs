//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion, nonzero exit on any failure.
//!
//! Run with `cargo test -p sketchedit --test acceptance`.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use sketchedit_core::cad_seq::{parse, serialize, tokenize, BoolOp, CadModel, Extent, Extrusion, Loop, SePair};
use sketchedit_core::captioning::{filter_triplet, Dataset, FilterConfig, ModalitySource};
use sketchedit_core::geometry::{assemble, sample_point_cloud, sample_surface, SampleConfig, CIRCLE_SEGMENTS, P3};
use sketchedit_core::masking::{extract_fills, gt_mask_with_fills, lcs, make_gt_mask, realize};
use sketchedit_core::metrics::{chamfer, dclip, jsd_distributions, valid_ratio, DClipInputs};
use sketchedit_core::pipeline::{build_infilling_prompt, build_locating_prompt};
use sketchedit_core::variation::{perturb, random_model};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit: Duration, what: &str) -> Result<(), String> {
    ensure(elapsed < limit, || format!("{what} took {elapsed:.2?}, limit {limit:?}"))
}

fn bin(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_sketchedit")).args(args).output().map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("sketchedit {args:?} failed: {}", String::from_utf8_lossy(&out.stderr)));
    }
    String::from_utf8(out.stdout).map_err(|e| e.to_string())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn grammar_round_trip() -> Check {
    let models: Vec<CadModel> = (0..1000).map(random_model).collect();
    let start = Instant::now();
    let mut failures = 0;
    for m in &models {
        let text = serialize(m);
        match parse(&text) {
            Ok(back) if back == *m && serialize(&back) == text => {}
            _ => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    ensure(failures == 0, || format!("{failures}/1000 models failed to round-trip"))?;
    within(elapsed, Duration::from_secs(5), "round-trip")?;
    Ok(format!("1000/1000 in {elapsed:.2?}"))
}

fn lcs_len_oracle(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let size = mask.count_ones() as usize;
        if size <= best {
            continue;
        }
        let mut it = b.iter();
        if (0..a.len()).filter(|i| mask >> i & 1 == 1).all(|i| it.any(|y| *y == a[i])) {
            best = size;
        }
    }
    best
}

fn lcs_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let word = |rng: &mut ChaCha8Rng| -> Vec<String> {
        let n = rng.gen_range(0..=12);
        (0..n).map(|_| ["a", "b", "c", "d"][rng.gen_range(0..4)].to_string()).collect()
    };
    let start = Instant::now();
    let mut failures = 0;
    for _ in 0..1000 {
        let (a, b) = (word(&mut rng), word(&mut rng));
        if lcs(&a, &b).pairs.len() != lcs_len_oracle(&a, &b) {
            failures += 1;
        }
    }
    let elapsed = start.elapsed();
    ensure(failures == 0, || format!("{failures}/1000 pairs disagree with enumeration"))?;
    within(elapsed, Duration::from_secs(10), "LCS check")?;
    Ok(format!("1000/1000 in {elapsed:.2?}"))
}

/// `fills` must also be recoverable from `edit` alone.
fn realizes(orig: &str, edit: &str) -> bool {
    let (o, e) = (tokenize(orig), tokenize(edit));
    let (masked, fills) = gt_mask_with_fills(&o, &e);
    masked == make_gt_mask(&o, &e)
        && realize(&masked, &fills).is_ok_and(|r| r == e)
        && extract_fills(&masked, &e).is_some_and(|f| realize(&masked, &f).is_ok_and(|r| r == e))
}

fn mask_realizability(synth: &Dataset) -> Check {
    let mut failures = 0;
    for seed in 0..1000u64 {
        let a = random_model(seed);
        let b = match perturb(&a, seed, None) {
            Ok((b, _)) if seed % 2 == 0 => b,
            _ => random_model(seed + 100_000),
        };
        if !realizes(&serialize(&a), &serialize(&b)) {
            failures += 1;
        }
    }
    let synth_failures = synth.triplets.iter().filter(|t| !realizes(&t.orig_text, &t.edit_text)).count();
    ensure(failures == 0 && synth_failures == 0, || {
        format!("random pairs: {failures}/1000 failed; synthesized: {synth_failures}/{} failed", synth.len())
    })?;
    Ok(format!("1000/1000 random pairs, {0}/{0} synthesized triplets", synth.len()))
}

fn synthesis_soundness(dir: &Path) -> Result<(String, Dataset), String> {
    let (a, b) = (dir.join("synth_a.jsonl"), dir.join("synth_b.jsonl"));
    let start = Instant::now();
    bin(&["synth", "--count", "500", "--seed", "1", "--out", s(&a)])?;
    let elapsed = start.elapsed();
    bin(&["synth", "--count", "500", "--seed", "1", "--out", s(&b)])?;
    let (ta, tb) = (std::fs::read(&a).map_err(|e| e.to_string())?, std::fs::read(&b).map_err(|e| e.to_string())?);
    ensure(ta == tb, || "two runs with seed 1 differ".into())?;
    let ds = Dataset::from_jsonl(std::str::from_utf8(&ta).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    ensure(ds.len() == 500, || format!("{} triplets", ds.len()))?;
    let rejected = ds.triplets.iter().filter(|t| !filter_triplet(t, &FilterConfig::default()).accept).count();
    ensure(rejected == 0, || format!("{rejected} triplets fail the filter"))?;
    let edits: Vec<String> = ds.triplets.iter().map(|t| t.edit_text.clone()).collect();
    let vr = valid_ratio(&edits).map_err(|e| e.to_string())?;
    ensure(vr == 1.0, || format!("edited-model VR {vr}"))?;
    let mut missing = Vec::new();
    let mut checked = 0;
    for (i, t) in ds.triplets.iter().enumerate() {
        if t.instruction.modality_source != ModalitySource::Template {
            continue;
        }
        let chain = t.record.as_ref().ok_or_else(|| format!("triplet {i} has no record"))?;
        let orig = parse(&t.orig_text).map_err(|e| e.to_string())?;
        for (record, before) in chain.steps(&orig).map_err(|e| e.to_string())? {
            checked += 1;
            let noun = record.primitive_class(&before).noun();
            if !t.instruction.text.contains(noun) {
                missing.push(format!("#{i} {:?} lacks {noun:?}", t.instruction.text));
            }
        }
    }
    ensure(missing.is_empty(), || missing.iter().take(3).cloned().collect::<Vec<_>>().join("; "))?;
    ensure(checked > 0, || "no template instructions to check".into())?;
    Ok((
        format!("500 triplets in {elapsed:.2?}, filter 100%, VR 1.0, {checked} records named, byte-identical reruns"),
        ds,
    ))
}

fn brute_chamfer(a: &[P3<f64>], b: &[P3<f64>]) -> f64 {
    let d2 = |p: &P3<f64>, q: &P3<f64>| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2);
    let directed = |from: &[P3<f64>], to: &[P3<f64>]| {
        let mut sum = 0.0;
        for p in from {
            sum += to.iter().map(|q| d2(p, q)).fold(f64::INFINITY, f64::min);
        }
        sum / from.len() as f64
    };
    directed(a, b) + directed(b, a)
}

fn jsd_oracle(p: &[f64], q: &[f64]) -> f64 {
    let kl = |x: &[f64], m: &[f64]| -> f64 {
        x.iter().zip(m).filter(|(a, _)| **a > 0.0).map(|(a, b)| a * (a / b).ln()).sum()
    };
    let m: Vec<f64> = p.iter().zip(q).map(|(a, b)| (a + b) / 2.0).collect();
    (kl(p, &m) + kl(q, &m)) / (2.0 * std::f64::consts::LN_2)
}

fn metric_oracles() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cloud = |rng: &mut ChaCha8Rng| -> Vec<P3<f64>> {
        let n = rng.gen_range(1..=20);
        (0..n).map(|_| [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)]).collect()
    };
    for i in 0..100 {
        let (a, b) = (cloud(&mut rng), cloud(&mut rng));
        let (got, want) = (chamfer(&a, &b).map_err(|e| e.to_string())?, brute_chamfer(&a, &b));
        // the brute force accumulates squared differences in the same order
        ensure(got == want, || format!("chamfer pair {i}: {got} vs {want}"))?;
    }

    let mut hists: Vec<(Vec<f64>, Vec<f64>)> = vec![(vec![0.5, 0.5], vec![1.0, 0.0])];
    while hists.len() < 50 {
        let cells = rng.gen_range(2..=64);
        let h = |rng: &mut ChaCha8Rng| -> Option<Vec<f64>> {
            let counts: Vec<u32> =
                (0..cells).map(|_| if rng.gen_bool(0.3) { 0 } else { rng.gen_range(1..100) }).collect();
            let total: u32 = counts.iter().sum();
            (total > 0).then(|| counts.iter().map(|&c| f64::from(c) / f64::from(total)).collect())
        };
        if let (Some(p), Some(q)) = (h(&mut rng), h(&mut rng)) {
            hists.push((p, q));
        }
    }
    for (i, (p, q)) in hists.iter().enumerate() {
        let (got, want) = (jsd_distributions(p, q).map_err(|e| e.to_string())?, jsd_oracle(p, q));
        ensure((got - want).abs() <= 1e-9, || format!("jsd histogram {i}: {got} vs {want}"))?;
    }
    let worked = jsd_distributions(&[0.5, 0.5], &[1.0, 0.0]).map_err(|e| e.to_string())?;
    ensure((worked - 0.31128).abs() < 5e-6, || format!("worked JSD {worked}"))?;

    let d = |img: [f64; 2], txt: [f64; 2]| {
        dclip(&DClipInputs {
            e_img_orig: vec![0.0, 0.0],
            e_img_edit: img.to_vec(),
            e_txt_orig: vec![0.0, 0.0],
            e_txt_edit: txt.to_vec(),
        })
        .map_err(|e| e.to_string())
    };
    let (par, anti, orth) = (d([1.0, 2.0], [3.0, 6.0])?, d([1.0, 2.0], [-1.0, -2.0])?, d([1.0, 0.0], [0.0, 5.0])?);
    ensure((par - 1.0).abs() < 1e-12 && (anti + 1.0).abs() < 1e-12 && orth.abs() < 1e-12, || {
        format!("dclip {par}/{anti}/{orth}")
    })?;
    Ok(format!("chamfer 100/100 exact, jsd 50/50 within 1e-9 (worked {worked:.5}), dclip 1/-1/0"))
}

fn end_to_end(dir: &Path) -> Check {
    let ts = dir.join("e2e_test.jsonl");
    let rs = dir.join("e2e_results.jsonl");
    bin(&["synth", "--count", "100", "--seed", "2", "--out", s(&ts)])?;
    bin(&["edit", "--testset", s(&ts), "--backend", "scripted", "--out", s(&rs)])?;
    let start = Instant::now();
    let table = bin(&["eval", "--testset", s(&ts), "--results", s(&rs), "--single-threaded"])?;
    let elapsed = start.elapsed();
    let json: Value = serde_json::from_str(&bin(&[
        "eval",
        "--testset",
        s(&ts),
        "--results",
        s(&rs),
        "--single-threaded",
        "--format",
        "json",
    ])?)
    .map_err(|e| e.to_string())?;
    within(elapsed, Duration::from_secs(120), "eval")?;
    let mut lines = table.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split_whitespace().collect();
    ensure(header == ["VR", "JSD", "CD", "D-CLIP"], || format!("header {header:?}"))?;
    let row: Vec<&str> = lines.next().unwrap_or_default().split_whitespace().collect();
    ensure(row.len() == 4 && row[0] == "100.0" && row[2] == "0.00", || format!("row {row:?}"))?;
    let (vr, jsd, cd) = (json["vr"].as_f64(), json["jsd"].as_f64(), json["cd"].as_f64());
    ensure(vr == Some(1.0), || format!("vr {vr:?}"))?;
    let jsd = jsd.ok_or("jsd missing")? * 100.0;
    ensure(jsd <= 1e-4, || format!("JSD x100 = {jsd}"))?;
    let cd = cd.ok_or("cd missing")? * 100.0;
    ensure(cd.abs() < 0.005, || format!("CD x100 = {cd}"))?;
    Ok(format!("VR 100.0, JSD x100 {jsd:.1e}, CD x100 {cd:.2}, single-threaded eval {elapsed:.2?}"))
}

fn prompt_golden() -> Check {
    const ORIG: &str = "sketch face loop line 192 64 line 192 192 line 64 192 line 64 64 \
extrude theta 0 phi 128 gamma 128 origin 128 128 128 scale 128 dist 160 128 op new ext one \
sketch face loop circle 128 128 32 \
extrude theta 0 phi 128 gamma 128 origin 128 128 160 scale 128 dist 144 128 op join ext one <eom>";
    const MASKED: &str = "sketch face loop line 192 64 line 192 192 line 64 192 line 64 64 \
extrude theta 0 phi 128 gamma 128 origin 128 128 128 scale 128 dist 160 128 op new ext one <mask> <eom>";
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden");
    let read = |name: &str| std::fs::read(golden.join(name)).map_err(|e| format!("{name}: {e}"));
    let loc = build_locating_prompt(ORIG, "Remove the cylinder.").map_err(|e| e.to_string())?;
    let inf = build_infilling_prompt(ORIG, "Remove the cylinder.", MASKED).map_err(|e| e.to_string())?;
    let (gl, gi) = (read("locating_prompt.txt")?, read("infilling_prompt.txt")?);
    ensure(loc.as_bytes() == gl, || "locating prompt differs from golden".into())?;
    ensure(inf.as_bytes() == gi, || "infilling prompt differs from golden".into())?;
    let has = |hay: &[u8], needle: &str| String::from_utf8_lossy(hay).contains(needle);
    ensure(has(&gl, "Replace the parts that need to be modified"), || "locating literal missing".into())?;
    ensure(has(&gi, "Generate the edited CAD sequence that could replace"), || "infilling literal missing".into())?;
    Ok(format!("{} + {} bytes match", gl.len(), gi.len()))
}

fn sym(op: BoolOp, dist: u8) -> Extrusion {
    Extrusion { dist_pos: dist, extent: Extent::Sym, op, ..Extrusion::default() }
}

fn geometry_sanity() -> Check {
    let cube = CadModel { ses: vec![SePair::simple(Loop::rectangle(64, 64, 192, 192), sym(BoolOp::New, 192))] };
    let a = assemble::<f64>(&cube).map_err(|e| e.to_string())?;
    let cloud = sample_point_cloud(&a, &SampleConfig::default()).map_err(|e| e.to_string())?;
    ensure(cloud.points.len() == 2000, || format!("{} points", cloud.points.len()))?;
    let mut exact_axes = 0;
    for k in 0..3 {
        let lo = cloud.points.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
        let hi = cloud.points.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        ensure(lo >= -0.5 && hi <= 0.5, || format!("axis {k} spans [{lo}, {hi}]"))?;
        if lo == -0.5 && hi == 0.5 {
            exact_axes += 1;
        }
    }
    ensure(exact_axes >= 1, || "no axis spans exactly [-0.5, 0.5]".into())?;

    // block of side 1 and height 0.75; the cut cylinder (r = 0.25) pierces both caps
    let holed = CadModel {
        ses: vec![
            SePair::simple(Loop::rectangle(64, 64, 192, 192), sym(BoolOp::New, 224)),
            SePair::simple(Loop::circle(128, 128, 32), sym(BoolOp::Cut, 255)),
        ],
    };
    let a = assemble::<f64>(&holed).map_err(|e| e.to_string())?;
    let raw = sample_surface(&a, &SampleConfig::default()).map_err(|e| e.to_string())?;
    ensure(raw.len() == 2000, || format!("{} points", raw.len()))?;
    let frame = a.primitives[1].frame;
    // points on the polygonal hole wall are no closer to the axis than the inscribed radius
    let inscribed = 0.25 * (std::f64::consts::PI / CIRCLE_SEGMENTS as f64).cos();
    let interior = raw
        .iter()
        .filter(|&&p| {
            let (u, v, _) = frame.to_local(p);
            (u * u + v * v).sqrt() * frame.scale < inscribed * (1.0 - 1e-9)
        })
        .count();
    let wall = raw
        .iter()
        .filter(|&&p| {
            let (u, v, _) = frame.to_local(p);
            (u * u + v * v).sqrt() * frame.scale <= 0.25 + 1e-9
        })
        .count();
    ensure(interior == 0, || format!("{interior} of 2000 points inside the cut"))?;
    ensure(wall > 0, || "no points on the hole wall".into())?;
    Ok(format!("cube bounds within [-0.5, 0.5] with {exact_axes} exact axes; cut cylinder: 0/2000 interior, {wall} on the wall"))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let mut failed = 0;
    let mut report = |name: &str, r: std::thread::Result<Check>| {
        let line = match r {
            Ok(Ok(detail)) => format!("[PASS] {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                format!("[FAIL] {name}: {why}")
            }
            Err(panic) => {
                failed += 1;
                let msg = panic
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()));
                format!("[FAIL] {name}: panicked: {}", msg.unwrap_or_default())
            }
        };
        println!("{line}");
    };

    report("grammar round-trip", catch_unwind(grammar_round_trip));
    report("LCS oracle", catch_unwind(lcs_oracle));
    let synth = catch_unwind(AssertUnwindSafe(|| synthesis_soundness(dir.path())));
    let dataset = match &synth {
        Ok(Ok((_, ds))) => Some(ds.clone()),
        _ => None,
    };
    report(
        "mask realizability",
        catch_unwind(AssertUnwindSafe(|| match &dataset {
            Some(ds) => mask_realizability(ds),
            None => Err("synthesized dataset unavailable".into()),
        })),
    );
    report("synthesis soundness", synth.map(|r| r.map(|(detail, _)| detail)));
    report("metric oracles", catch_unwind(metric_oracles));
    report("end-to-end scripted pipeline", catch_unwind(AssertUnwindSafe(|| end_to_end(dir.path()))));
    report("prompt golden files", catch_unwind(prompt_golden));
    report("geometry sanity", catch_unwind(geometry_sanity));

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}
