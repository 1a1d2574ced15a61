//! Scalar metrics and curves for judging volume estimators: AE/APE
//! aggregates with cumulative error curves and tolerance success rates,
//! plus PCK, segmentation IoU, and 3D-pose accuracy for the intermediate
//! representations.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::annotations::AnnotationStore;
use crate::error::{Error, Result};
use crate::labels::{
    depth_to_bin, SegmentationMask, Skeleton2D, Skeleton3D, JOINT_COUNT, SEGMENTATION_CLASSES,
};
use crate::parts::PartVolumes;

/// Absolute percentage error: `100 * |pred - truth| / truth`.
pub fn ape(pred: f64, truth: f64) -> Result<f64> {
    if truth <= 0.0 {
        return Err(Error::Domain(format!(
            "APE needs a positive reference volume, got {truth}"
        )));
    }
    Ok(100.0 * (pred - truth).abs() / truth)
}

/// One evaluated sample: predicted per-part volumes paired with their
/// ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumePrediction {
    /// Identifier used in error messages, e.g. "clip/frame".
    pub id: String,
    /// Predicted volumes in dm³, keyed like the truth.
    pub predicted: BTreeMap<String, f64>,
    pub predicted_total: f64,
    pub truth: PartVolumes,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub ae_mean: f64,
    pub ae_std: f64,
    pub ape_mean: f64,
    pub ape_std: f64,
}

fn error_stats(aes: &[f64], apes: &[f64]) -> ErrorStats {
    ErrorStats {
        ae_mean: mean(aes),
        ae_std: population_std(aes),
        ape_mean: mean(apes),
        ape_std: population_std(apes),
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

// Population standard deviation (divide by N).
fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

/// Cumulative curve sample step in APE percent.
pub const CURVE_STEP_PCT: f64 = 0.1;

/// Aggregated errors over a prediction set.
#[derive(Debug, Clone, Serialize)]
pub struct MetricReport {
    /// What was evaluated (split name or source description); set by the
    /// harness so reports are never ambiguous about their split.
    pub evaluated: Option<String>,
    pub sample_count: usize,
    pub per_part: BTreeMap<String, ErrorStats>,
    pub total: ErrorStats,
    /// `(threshold %, ratio of samples with total APE <= threshold)` at
    /// 0.1% steps over [0, 100].
    pub curve: Vec<(f64, f64)>,
    /// Exact success ratios at the requested tolerances.
    pub success_at: Vec<(f64, f64)>,
}

impl MetricReport {
    /// Exact ratio of samples with total APE at most `tolerance_pct`.
    pub fn success_ratio(&self, tolerance_pct: f64) -> Option<f64> {
        self.success_at
            .iter()
            .find(|(t, _)| *t == tolerance_pct)
            .map(|(_, r)| *r)
    }
}

/// Compute per-part and total AE/APE statistics, the cumulative curve, and
/// success ratios at the requested tolerances.
pub fn aggregate(samples: &[VolumePrediction], tolerances: &[f64]) -> Result<MetricReport> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no prediction samples".into()));
    }
    let names: Vec<String> = samples[0].truth.names().map(str::to_owned).collect();
    for sample in samples {
        if sample.predicted.len() != names.len()
            || names.iter().any(|n| !sample.predicted.contains_key(n))
            || names.iter().any(|n| sample.truth.get(n).is_none())
        {
            return Err(Error::ShapeMismatch(format!(
                "sample '{}' does not carry the same part names as the rest",
                sample.id
            )));
        }
    }

    let mut per_part = BTreeMap::new();
    for name in &names {
        let mut aes = Vec::with_capacity(samples.len());
        let mut apes = Vec::with_capacity(samples.len());
        for sample in samples {
            let pred = sample.predicted[name];
            let truth = sample.truth.get(name).unwrap();
            aes.push((pred - truth).abs());
            apes.push(ape(pred, truth)?);
        }
        per_part.insert(name.clone(), error_stats(&aes, &apes));
    }

    let mut total_aes = Vec::with_capacity(samples.len());
    let mut total_apes = Vec::with_capacity(samples.len());
    for sample in samples {
        let truth = sample.truth.total_dm3();
        total_aes.push((sample.predicted_total - truth).abs());
        total_apes.push(ape(sample.predicted_total, truth)?);
    }
    let total = error_stats(&total_aes, &total_apes);

    let mut sorted_apes = total_apes.clone();
    sorted_apes.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted_apes.len() as f64;
    let steps = (100.0 / CURVE_STEP_PCT).round() as usize;
    let mut curve = Vec::with_capacity(steps + 1);
    let mut below = 0usize;
    for i in 0..=steps {
        let t = i as f64 * CURVE_STEP_PCT;
        while below < sorted_apes.len() && sorted_apes[below] <= t {
            below += 1;
        }
        curve.push((t, below as f64 / n));
    }

    let success_at = tolerances
        .iter()
        .map(|&t| {
            let count = total_apes.iter().filter(|&&a| a <= t).count();
            (t, count as f64 / n)
        })
        .collect();

    Ok(MetricReport {
        evaluated: None,
        sample_count: samples.len(),
        per_part,
        total,
        curve,
        success_at,
    })
}

/// Per-joint correctness under PCK. `None` marks joints that are invisible
/// in the truth and therefore excluded.
#[derive(Debug, Clone, PartialEq)]
pub struct PckResult {
    pub per_joint: [Option<bool>; JOINT_COUNT],
    pub correct: usize,
    pub visible: usize,
    pub ratio: f64,
}

/// Percentage of correct keypoints: a joint counts when its distance to
/// the truth is at most `alpha * norm`.
pub fn pck(pred: &Skeleton2D, truth: &Skeleton2D, alpha: f64, norm: f64) -> Result<PckResult> {
    if norm <= 0.0 {
        return Err(Error::Domain(format!(
            "PCK normalization length {norm} must be positive"
        )));
    }
    let mut per_joint = [None; JOINT_COUNT];
    let mut correct = 0usize;
    let mut visible = 0usize;
    for (i, (p, t)) in pred.joints().iter().zip(truth.joints()).enumerate() {
        if !t.visible {
            continue;
        }
        visible += 1;
        let ok = p.visible && ((p.u - t.u).powi(2) + (p.v - t.v).powi(2)).sqrt() <= alpha * norm;
        per_joint[i] = Some(ok);
        if ok {
            correct += 1;
        }
    }
    if visible == 0 {
        return Err(Error::EmptyInput("no visible joints in the truth".into()));
    }
    Ok(PckResult {
        per_joint,
        correct,
        visible,
        ratio: correct as f64 / visible as f64,
    })
}

/// Default PCK normalization: the larger side of the bounding box of the
/// skeleton's visible joints.
pub fn bbox_norm(skel: &Skeleton2D) -> Option<f64> {
    let mut bounds: Option<(f64, f64, f64, f64)> = None;
    for j in skel.joints().iter().filter(|j| j.visible) {
        bounds = Some(match bounds {
            None => (j.u, j.u, j.v, j.v),
            Some((u0, u1, v0, v1)) => (u0.min(j.u), u1.max(j.u), v0.min(j.v), v1.max(j.v)),
        });
    }
    bounds.map(|(u0, u1, v0, v1)| (u1 - u0).max(v1 - v0))
}

/// Per-class intersection-over-union. Classes absent from both masks are
/// `None` and excluded from the mean; the mean also excludes background.
#[derive(Debug, Clone, PartialEq)]
pub struct IouReport {
    pub per_class: [Option<f64>; SEGMENTATION_CLASSES],
    pub mean_excluding_background: Option<f64>,
}

pub fn iou(pred: &SegmentationMask, truth: &SegmentationMask) -> Result<IouReport> {
    if pred.resolution() != truth.resolution() {
        return Err(Error::ShapeMismatch(format!(
            "mask resolutions differ: {} vs {}",
            pred.resolution(),
            truth.resolution()
        )));
    }
    let mut intersection = [0usize; SEGMENTATION_CLASSES];
    let mut pred_count = [0usize; SEGMENTATION_CLASSES];
    let mut truth_count = [0usize; SEGMENTATION_CLASSES];
    for (&p, &t) in pred.classes().iter().zip(truth.classes()) {
        pred_count[p as usize] += 1;
        truth_count[t as usize] += 1;
        if p == t {
            intersection[p as usize] += 1;
        }
    }
    let mut per_class = [None; SEGMENTATION_CLASSES];
    for c in 0..SEGMENTATION_CLASSES {
        let union = pred_count[c] + truth_count[c] - intersection[c];
        if union > 0 {
            per_class[c] = Some(intersection[c] as f64 / union as f64);
        }
    }
    let foreground: Vec<f64> = per_class[1..].iter().flatten().copied().collect();
    let mean_excluding_background = if foreground.is_empty() {
        None
    } else {
        Some(foreground.iter().sum::<f64>() / foreground.len() as f64)
    };
    Ok(IouReport {
        per_class,
        mean_excluding_background,
    })
}

pub const DEFAULT_SPATIAL_TOLERANCE_PX: f64 = 12.0;
pub const DEFAULT_DEPTH_TOLERANCE_BINS: usize = 2;

/// Ratio of joints whose 2D position is within `spatial_tol_px` and whose
/// depth bin deviates by at most `depth_tol_bins` (both inclusive).
pub fn pose3d_accuracy(
    pred: &Skeleton3D,
    truth: &Skeleton3D,
    spatial_tol_px: f64,
    depth_tol_bins: usize,
) -> Result<f64> {
    let mut correct = 0usize;
    for (p, t) in pred.joints().iter().zip(truth.joints()) {
        let dist = ((p.u - t.u).powi(2) + (p.v - t.v).powi(2)).sqrt();
        let bin_delta = depth_to_bin(p.depth)?.abs_diff(depth_to_bin(t.depth)?);
        if dist <= spatial_tol_px && bin_delta <= depth_tol_bins {
            correct += 1;
        }
    }
    Ok(correct as f64 / JOINT_COUNT as f64)
}

/// Write the full report as pretty JSON.
pub fn write_report_json<W: Write>(report: &MetricReport, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, report).map_err(|e| Error::Format(e.to_string()))
}

/// Write the cumulative curve as CSV with columns `error,ratio`.
pub fn write_curve_csv<W: Write>(report: &MetricReport, mut writer: W) -> Result<()> {
    writeln!(writer, "error,ratio")?;
    for (t, ratio) in &report.curve {
        writeln!(writer, "{t:.1},{ratio}")?;
    }
    Ok(())
}

/// One predicted sample as stored on disk (JSON lines).
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub clip_id: String,
    pub frame_index: u32,
    pub volumes_dm3: BTreeMap<String, f64>,
    pub total_dm3: f64,
}

#[derive(Serialize, Deserialize)]
struct RawPrediction {
    clip_id: String,
    frame_index: u32,
    volumes_dm3: BTreeMap<String, f64>,
}

/// Read predictions: one `{clip_id, frame_index, volumes_dm3}` object per
/// line, where `volumes_dm3` includes a `total` entry.
pub fn read_predictions_jsonl<R: BufRead>(reader: R) -> Result<Vec<PredictionRecord>> {
    let mut records = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawPrediction = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: index + 1,
            message: e.to_string(),
        })?;
        let mut volumes = raw.volumes_dm3;
        let total = volumes.remove("total").ok_or_else(|| Error::Parse {
            line: index + 1,
            message: "prediction volumes are missing 'total'".into(),
        })?;
        records.push(PredictionRecord {
            clip_id: raw.clip_id,
            frame_index: raw.frame_index,
            volumes_dm3: volumes,
            total_dm3: total,
        });
    }
    Ok(records)
}

pub fn write_predictions_jsonl<W: Write>(
    records: &[PredictionRecord],
    mut writer: W,
) -> Result<()> {
    for record in records {
        let mut volumes = record.volumes_dm3.clone();
        volumes.insert("total".to_owned(), record.total_dm3);
        let raw = RawPrediction {
            clip_id: record.clip_id.clone(),
            frame_index: record.frame_index,
            volumes_dm3: volumes,
        };
        serde_json::to_writer(&mut writer, &raw).map_err(|e| Error::Format(e.to_string()))?;
        writeln!(writer)?;
    }
    Ok(())
}

/// Pair predictions with their annotated ground truth. Every prediction
/// must match an annotated frame; the first ten unmatched ids are listed
/// in the error.
pub fn pair_predictions(
    store: &AnnotationStore,
    predictions: &[PredictionRecord],
) -> Result<Vec<VolumePrediction>> {
    let mut unmatched = Vec::new();
    let mut paired = Vec::with_capacity(predictions.len());
    for record in predictions {
        let id = format!("{}/{}", record.clip_id, record.frame_index);
        if store.frame(&record.clip_id, record.frame_index).is_none() {
            unmatched.push(id);
            continue;
        }
        let clip = store.clip(&record.clip_id).expect("frame implies clip");
        paired.push(VolumePrediction {
            id,
            predicted: record.volumes_dm3.clone(),
            predicted_total: record.total_dm3,
            truth: clip.volumes.clone(),
        });
    }
    if !unmatched.is_empty() {
        let shown: Vec<&str> = unmatched.iter().take(10).map(String::as_str).collect();
        return Err(Error::IdMismatch(format!(
            "{} prediction(s) without matching annotations: {}",
            unmatched.len(),
            shown.join(", ")
        )));
    }
    Ok(paired)
}
