//! Error metrics against ground truth and their aggregation.

use crate::solver::SceneEstimate;
use crate::stats::Summary;
use crate::synth::GroundTruth;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("estimate covers {estimate} input boxes but the ground truth lists {truth} objects")]
    Correspondence { estimate: usize, truth: usize },
    #[error("{0} needs at least one sample")]
    Empty(&'static str),
}

/// Which height the ground truth records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeightComparison {
    /// Posed heights, compared directly.
    #[default]
    Actual,
    /// Standing heights; estimates are divided by their upright ratio first.
    Upright,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMetrics {
    pub e_hcam: f64,
    /// `e_hcam` divided by the true camera height.
    pub e_hcam_rel: f64,
    /// Mean absolute height error over the estimated objects.
    pub e_hobj: f64,
    pub object_errors: Vec<f64>,
    /// Absolute top-row residuals of the final layer.
    pub residuals: Vec<f64>,
    /// Mean of `residuals`.
    pub l_vt: f64,
}

/// Metrics of one estimate. Objects are matched by input index; boxes the
/// estimator excluded do not contribute.
pub fn compute_metrics(
    estimate: &SceneEstimate,
    truth: &GroundTruth,
    comparison: HeightComparison,
) -> Result<SceneMetrics, EvalError> {
    metrics_for_inputs(estimate, estimate.num_inputs(), truth, comparison)
}

/// As [`compute_metrics`] for an estimate computed from `num_inputs` boxes,
/// some of which were dropped before the estimator saw them.
pub fn metrics_for_inputs(
    estimate: &SceneEstimate,
    num_inputs: usize,
    truth: &GroundTruth,
    comparison: HeightComparison,
) -> Result<SceneMetrics, EvalError> {
    if num_inputs != truth.heights_m.len() || estimate.object_indices.iter().any(|&i| i >= num_inputs) {
        return Err(EvalError::Correspondence {
            estimate: num_inputs,
            truth: truth.heights_m.len(),
        });
    }
    let object_errors: Vec<f64> = estimate
        .heights_m
        .iter()
        .zip(&estimate.object_indices)
        .zip(&estimate.upright_ratios)
        .map(|((&h, &i), &ratio)| {
            let h = match comparison {
                HeightComparison::Actual => h,
                HeightComparison::Upright => h / ratio,
            };
            (h - truth.heights_m[i]).abs()
        })
        .collect();
    let residuals: Vec<f64> = estimate.final_layer().residuals.iter().map(|r| r.abs()).collect();
    let mean = |v: &[f64]| {
        if v.is_empty() {
            0.0
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    let e_hcam = (estimate.cam_height_m - truth.cam_height_m).abs();
    Ok(SceneMetrics {
        e_hcam,
        e_hcam_rel: e_hcam / truth.cam_height_m,
        e_hobj: mean(&object_errors),
        l_vt: mean(&residuals),
        object_errors,
        residuals,
    })
}

/// Mean, population standard deviation and lower median.
pub fn summarize(samples: &[f64]) -> Result<Summary, EvalError> {
    crate::stats::summarize(samples).ok_or(EvalError::Empty("summary"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub scenes: Vec<SceneMetrics>,
    /// Over scenes.
    pub e_hcam: Summary,
    /// Over scenes.
    pub e_hcam_rel: Summary,
    /// Over all objects of all scenes.
    pub e_hobj: Summary,
    /// Over all objects of all scenes.
    pub l_vt: Summary,
}

impl MetricReport {
    pub fn from_scenes(scenes: Vec<SceneMetrics>) -> Result<Self, EvalError> {
        let collect = |f: fn(&SceneMetrics) -> Vec<f64>| scenes.iter().flat_map(f).collect::<Vec<_>>();
        let e_hcam = summarize(&collect(|s| vec![s.e_hcam]))?;
        let e_hcam_rel = summarize(&collect(|s| vec![s.e_hcam_rel]))?;
        let e_hobj = summarize(&collect(|s| s.object_errors.clone()))?;
        let l_vt = summarize(&collect(|s| s.residuals.clone()))?;
        Ok(Self {
            scenes,
            e_hcam,
            e_hcam_rel,
            e_hobj,
            l_vt,
        })
    }
}

/// Fraction of absolute residuals at or below each threshold.
pub fn threshold_curve(residuals: &[f64], thresholds: &[f64]) -> Result<Vec<(f64, f64)>, EvalError> {
    if residuals.is_empty() {
        return Err(EvalError::Empty("threshold curve"));
    }
    let mut sorted: Vec<f64> = residuals.iter().map(|r| r.abs()).collect();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&t| (t, sorted.partition_point(|&r| r <= t) as f64 / n))
        .collect())
}

/// Threshold curve as CSV with a header row.
pub fn curve_csv(curve: &[(f64, f64)]) -> String {
    let mut out = String::from("threshold,fraction\n");
    for (t, f) in curve {
        out.push_str(&format!("{t},{f}\n"));
    }
    out
}
