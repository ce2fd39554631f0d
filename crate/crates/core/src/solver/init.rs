use super::features::init_features_with_heights;
use super::problem::classify_box;
use super::{DetectionBox, InitFeatures, RefinementConfig, SolveError};
use crate::prior::PriorTable;
use crate::stats::weighted_median;

/// Camera height implied by each object standing at its feature height,
/// inverting `h_obj = h_cam (v_t - v_b) / (v0 - v_b)`. `None` for objects
/// that carry no vote (zero-height box or bottom on the horizon).
pub fn camera_height_votes(features: &[InitFeatures]) -> Vec<Option<f64>> {
    features
        .iter()
        .map(|f| {
            let span = f.v_top() - f.v_bottom();
            let gap = f.horizon() - f.v_bottom();
            let vote = f.height() * gap / span;
            (span != 0.0 && gap.abs() > super::problem::MIN_HORIZON_GAP && vote.is_finite()).then_some(vote)
        })
        .collect()
}

/// Weighted median of the usable votes, clamped to the configured bounds.
pub(crate) fn aggregate_votes(
    features: &[InitFeatures],
    weights: &[f64],
    config: &RefinementConfig,
) -> Option<f64> {
    let votes: Vec<(f64, f64)> = camera_height_votes(features)
        .into_iter()
        .zip(weights)
        .filter_map(|(v, &w)| Some((v?, w)))
        .collect();
    weighted_median(&votes).map(|h| config.clamp_cam_height(h))
}

/// Initial camera height with every object at its category prior mean.
/// Boxes above or on the horizon and malformed boxes do not vote.
pub fn init_camera_height(
    v0: f64,
    boxes: &[DetectionBox],
    priors: &PriorTable,
    config: &RefinementConfig,
) -> Result<f64, SolveError> {
    if boxes.is_empty() {
        return Err(SolveError::EmptyDetections);
    }
    let usable: Vec<DetectionBox> = boxes
        .iter()
        .filter(|b| classify_box(b, v0).is_none())
        .cloned()
        .collect();
    let means = usable
        .iter()
        .map(|b| priors.get(b.category).map(|p| p.mu_m))
        .collect::<Result<Vec<_>, _>>()?;
    let weights: Vec<f64> = usable.iter().map(|b| b.weight).collect();
    let features = init_features_with_heights(v0, &usable, means);
    aggregate_votes(&features, &weights, config).ok_or(SolveError::AllDegenerate(boxes.len() - usable.len()))
}
