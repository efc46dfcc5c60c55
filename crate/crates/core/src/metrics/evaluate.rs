use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cad_seq::parse;
use crate::captioning::Dataset;
use crate::geometry::{assemble, mesh, render_preview, sample_point_cloud, CameraConfig, PointCloud, SampleConfig};
use crate::pipeline::ResultLine;

use super::{
    chamfer, dclip, edit_text, jsd, DClipInputs, EmbeddingBackend, MetricsError, DEFAULT_RESOLUTION, NEUTRAL_TEXT,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub resolution: usize,
    pub sample: SampleConfig,
    /// Evaluate examples on the rayon pool.
    pub parallel: bool,
    pub camera: CameraConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            resolution: DEFAULT_RESOLUTION,
            sample: SampleConfig::default(),
            parallel: true,
            camera: CameraConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    /// Candidates evaluated.
    pub total: usize,
    pub parsed: usize,
    pub rendered: usize,
    pub examples: usize,
    /// Examples with at least one valid candidate.
    pub cd_examples: usize,
    /// Examples contributing to D-CLIP.
    pub dclip_examples: usize,
}

/// Unscaled metric values; [`MetricsReport::table`] applies the x100 presentation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub vr: f64,
    pub jsd: Option<f64>,
    /// Mean over examples of the best valid candidate's Chamfer distance.
    pub cd: Option<f64>,
    /// Mean over examples of the mean Chamfer distance of valid candidates.
    pub cd_mean: Option<f64>,
    pub dclip: Option<f64>,
    pub counts: Counts,
}

fn cell(v: Option<f64>, decimals: usize) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{:.*}", decimals, x * 100.0))
}

impl MetricsReport {
    /// Aligned table with columns VR, JSD, CD, D-CLIP, every value multiplied by 100.
    pub fn table(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{:>8} {:>8} {:>8} {:>8}", "VR", "JSD", "CD", "D-CLIP").unwrap();
        writeln!(
            out,
            "{:>8} {:>8} {:>8} {:>8}",
            cell(Some(self.vr), 1),
            cell(self.jsd, 2),
            cell(self.cd, 2),
            cell(self.dclip, 2)
        )
        .unwrap();
        writeln!(out, "CD over all valid candidates: {}", cell(self.cd_mean, 2)).unwrap();
        writeln!(
            out,
            "candidates: {} total, {} parsed, {} rendered; examples: {}",
            self.counts.total, self.counts.parsed, self.counts.rendered, self.counts.examples
        )
        .unwrap();
        out
    }
}

struct Sampled {
    parsed: bool,
    cloud: Option<PointCloud<f64>>,
}

fn sample_text(text: &str, cfg: &SampleConfig) -> Sampled {
    match parse(text) {
        Err(_) => Sampled { parsed: false, cloud: None },
        Ok(m) => {
            Sampled { parsed: true, cloud: assemble::<f64>(&m).ok().and_then(|a| sample_point_cloud(&a, cfg).ok()) }
        }
    }
}

fn preview(text: &str, camera: &CameraConfig) -> Option<Vec<u8>> {
    let model = parse(text).ok()?;
    let m = mesh(&assemble::<f64>(&model).ok()?).ok()?;
    Some(render_preview(&m, camera).ok()?.to_png())
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

struct ExampleScore {
    best: Option<(f64, usize)>,
    mean: Option<f64>,
}

/// Scores batch results against their test set.
///
/// Candidate clouds are cached by text, so identical candidates share one
/// sample and the outcome does not depend on evaluation order.
pub fn evaluate(
    testset: &Dataset,
    results: &[ResultLine],
    cfg: &EvalConfig,
    embedder: Option<&dyn EmbeddingBackend>,
) -> Result<MetricsReport, MetricsError> {
    if testset.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let k = results.first().map_or(0, |r| r.k);
    let got: usize = results.iter().map(|r| r.candidates.len()).sum();
    if k == 0 || results.len() != testset.len() || results.iter().any(|r| r.candidates.len() != k) {
        return Err(MetricsError::ArityMismatch { expected: k.max(1) * testset.len(), got });
    }
    for (index, (r, t)) in results.iter().zip(&testset.triplets).enumerate() {
        if r.orig.trim() != t.orig_text.trim() {
            return Err(MetricsError::Misaligned { index });
        }
    }

    let texts: BTreeSet<&str> = testset
        .triplets
        .iter()
        .map(|t| t.edit_text.trim())
        .chain(results.iter().flat_map(|r| r.candidates.iter().map(|c| c.edit_text.trim())))
        .collect();
    let texts: Vec<&str> = texts.into_iter().collect();
    let sampled: Vec<Sampled> = if cfg.parallel {
        texts.par_iter().map(|t| sample_text(t, &cfg.sample)).collect()
    } else {
        texts.iter().map(|t| sample_text(t, &cfg.sample)).collect()
    };
    let cache: HashMap<&str, Sampled> = texts.into_iter().zip(sampled).collect();
    let lookup = |t: &str| &cache[t.trim()];

    let mut counts = Counts { examples: testset.len(), ..Counts::default() };
    for r in results {
        for c in &r.candidates {
            let s = lookup(&c.edit_text);
            counts.total += 1;
            counts.parsed += usize::from(s.parsed);
            counts.rendered += usize::from(s.cloud.is_some());
        }
    }
    let vr = counts.rendered as f64 / counts.total as f64;

    let gt_clouds: Vec<&PointCloud<f64>> =
        testset.triplets.iter().filter_map(|t| lookup(&t.edit_text).cloud.as_ref()).collect();
    let cand_clouds: Vec<&PointCloud<f64>> =
        results.iter().flat_map(|r| r.candidates.iter().filter_map(|c| lookup(&c.edit_text).cloud.as_ref())).collect();
    let jsd = if gt_clouds.is_empty() || cand_clouds.is_empty() {
        None
    } else {
        Some(jsd(&gt_clouds, &cand_clouds, cfg.resolution)?)
    };

    let score = |(r, t): (&ResultLine, &crate::captioning::EditTriplet)| -> ExampleScore {
        let Some(gt) = lookup(&t.edit_text).cloud.as_ref() else {
            return ExampleScore { best: None, mean: None };
        };
        let mut per_text: HashMap<&str, f64> = HashMap::new();
        let mut values = Vec::new();
        let mut best: Option<(f64, usize)> = None;
        for (i, c) in r.candidates.iter().enumerate() {
            let Some(cloud) = lookup(&c.edit_text).cloud.as_ref() else { continue };
            let d = *per_text
                .entry(c.edit_text.trim())
                .or_insert_with(|| chamfer(&cloud.points, &gt.points).expect("clouds are non-empty"));
            values.push(d);
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, i));
            }
        }
        ExampleScore { best, mean: mean(&values) }
    };
    let pairs: Vec<_> = results.iter().zip(&testset.triplets).collect();
    let scores: Vec<ExampleScore> = if cfg.parallel {
        pairs.par_iter().map(|&p| score(p)).collect()
    } else {
        pairs.iter().map(|&p| score(p)).collect()
    };
    let best: Vec<f64> = scores.iter().filter_map(|s| s.best.map(|b| b.0)).collect();
    let means: Vec<f64> = scores.iter().filter_map(|s| s.mean).collect();
    counts.cd_examples = best.len();

    let dclip_value = match embedder {
        None => None,
        Some(e) => {
            let (value, n) = mean_dclip(e, testset, results, &scores, cfg)?;
            counts.dclip_examples = n;
            value
        }
    };

    Ok(MetricsReport { vr, jsd, cd: mean(&best), cd_mean: mean(&means), dclip: dclip_value, counts })
}

fn mean_dclip(
    embedder: &dyn EmbeddingBackend,
    testset: &Dataset,
    results: &[ResultLine],
    scores: &[ExampleScore],
    cfg: &EvalConfig,
) -> Result<(Option<f64>, usize), MetricsError> {
    let mut images = Vec::new();
    let mut texts = vec![NEUTRAL_TEXT.to_string()];
    let mut jobs = Vec::new();
    for ((r, t), s) in results.iter().zip(&testset.triplets).zip(scores) {
        let Some((_, best)) = s.best else { continue };
        let (Some(before), Some(after)) =
            (preview(&t.orig_text, &cfg.camera), preview(&r.candidates[best].edit_text, &cfg.camera))
        else {
            continue;
        };
        jobs.push((images.len(), texts.len()));
        images.push(before);
        images.push(after);
        texts.push(edit_text(&t.instruction.text));
    }
    if jobs.is_empty() {
        return Ok((None, 0));
    }
    let img = embedder.embed_images(&images)?;
    let txt = embedder.embed_texts(&texts)?;
    if img.len() != images.len() || txt.len() != texts.len() {
        return Err(MetricsError::Backend("embedding count differs from request".into()));
    }
    let mut values = Vec::with_capacity(jobs.len());
    for (i, j) in jobs {
        let x = DClipInputs {
            e_img_orig: img[i].clone(),
            e_img_edit: img[i + 1].clone(),
            e_txt_orig: txt[0].clone(),
            e_txt_edit: txt[j].clone(),
        };
        match dclip(&x) {
            Ok(v) => values.push(v),
            Err(MetricsError::ZeroDelta) => {}
            Err(e) => return Err(e),
        }
    }
    Ok((mean(&values), values.len()))
}
