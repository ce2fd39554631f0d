//! Comparison methods built on the linear height model
//! `h_obj = h_cam (v_t - v_b) / (v0 - v_b)`.
//!
//! Both report their reprojection residuals under that same linear model,
//! which is what makes the free-height variant's residuals vanish.

use crate::prior::PriorTable;
use crate::solver::{
    init_camera_height, DetectionBox, LayerTrace, Method, RefinementConfig, SceneEstimate, SceneObservation,
    SceneProblem, SolveError, SolveFlag, SolverState,
};
use serde::{Deserialize, Serialize};

/// Gaussian prior over the camera height used by [`pgm_full`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CamHeightPrior {
    pub mu_m: f64,
    pub sigma_m: f64,
}

impl Default for CamHeightPrior {
    fn default() -> Self {
        Self {
            mu_m: 1.6,
            sigma_m: 0.5,
        }
    }
}

/// Object-height evidence below this fraction of the camera-prior precision
/// means the detections do not constrain the scale.
const ILL_POSED_RATIO: f64 = 1e-12;

fn linear_top(b: &DetectionBox, v0: f64, cam_height_m: f64, height_m: f64) -> f64 {
    b.v_bottom + height_m * (v0 - b.v_bottom) / cam_height_m
}

/// Builds the estimate and its single trace layer with residuals under the
/// linear model.
fn linear_estimate(
    method: Method,
    problem: &SceneProblem,
    observation: &SceneObservation,
    state: SolverState,
    flags: Vec<SolveFlag>,
) -> SceneEstimate {
    let v0 = observation.horizon.v0;
    let config = problem.config();
    let indices = problem.object_indices();
    let boxes: Vec<&DetectionBox> = indices.iter().map(|&i| &observation.boxes[i]).collect();
    let weights: Vec<f64> = boxes.iter().map(|b| b.weight).collect();
    let total_w: f64 = weights.iter().sum();

    let reprojected_v_top: Vec<f64> = boxes
        .iter()
        .zip(&state.heights_m)
        .map(|(b, &h)| linear_top(b, v0, state.cam_height_m, h))
        .collect();
    let residuals: Vec<f64> = reprojected_v_top
        .iter()
        .zip(&boxes)
        .map(|(t, b)| t - b.v_top)
        .collect();
    let reprojection_loss = residuals
        .iter()
        .zip(&weights)
        .map(|(r, w)| w * r.abs())
        .sum::<f64>()
        / total_w;
    let prior_loss = problem.prior_loss(&state);
    let layer = LayerTrace {
        layer: 0,
        cam_height_m: state.cam_height_m,
        heights_m: state.heights_m.clone(),
        reprojection_loss,
        prior_loss,
        total_loss: config.alpha_reprojection * reprojection_loss + config.alpha_prior * prior_loss,
        reprojected_v_top,
        residuals,
        step_accepted: true,
    };
    SceneEstimate {
        method,
        calibration: problem.calibration(),
        cam_height_m: state.cam_height_m,
        heights_m: state.heights_m,
        object_indices: indices,
        upright_ratios: vec![1.0; boxes.len()],
        excluded: problem.excluded().to_vec(),
        trace: vec![layer],
        flags,
    }
}

fn baseline_config(config: &RefinementConfig) -> RefinementConfig {
    RefinementConfig {
        use_upright_ratio: false,
        ..*config
    }
}

/// Every object at its canonical (prior mean) height; the camera height is
/// the weighted median of the per-object votes.
pub fn pgm_fixed_height(
    observation: &SceneObservation,
    canonical: &PriorTable,
    config: &RefinementConfig,
) -> Result<SceneEstimate, SolveError> {
    let config = baseline_config(config);
    let problem = SceneProblem::new(observation, canonical, &config)?;
    let indices = problem.object_indices();
    let usable: Vec<DetectionBox> = indices.iter().map(|&i| observation.boxes[i].clone()).collect();
    let cam_height_m = init_camera_height(observation.horizon.v0, &usable, canonical, &config)?;
    let heights_m = usable
        .iter()
        .map(|b| canonical.get(b.category).map(|p| p.mu_m))
        .collect::<Result<_, _>>()?;
    let state = SolverState {
        cam_height_m,
        heights_m,
    };
    Ok(linear_estimate(
        Method::PgmFixed,
        &problem,
        observation,
        state,
        Vec::new(),
    ))
}

/// MAP camera height under the object priors and a camera-height prior,
/// with every object height set so that its linear reprojection is exact.
///
/// With `h_i = h_cam k_i` the negative log posterior
/// `sum w_i (h_cam k_i - mu_i)^2 / sigma_i^2 + (h_cam - mu_c)^2 / sigma_c^2`
/// is quadratic in `h_cam`, so the alternation between heights and camera
/// height reaches its fixed point in closed form.
pub fn pgm_full(
    observation: &SceneObservation,
    priors: &PriorTable,
    cam_prior: &CamHeightPrior,
    config: &RefinementConfig,
) -> Result<SceneEstimate, SolveError> {
    if !(cam_prior.sigma_m > 0.0 && cam_prior.mu_m.is_finite()) {
        return Err(SolveError::InvalidConfig(format!(
            "camera height prior needs a positive sigma, got {}",
            cam_prior.sigma_m
        )));
    }
    let config = baseline_config(config);
    let problem = SceneProblem::new(observation, priors, &config)?;
    let v0 = observation.horizon.v0;
    let indices = problem.object_indices();
    let usable: Vec<&DetectionBox> = indices.iter().map(|&i| &observation.boxes[i]).collect();
    let total_w: f64 = usable.iter().map(|b| b.weight).sum();

    let cam_precision = 1.0 / (cam_prior.sigma_m * cam_prior.sigma_m);
    let mut num = cam_prior.mu_m * cam_precision;
    let mut den = cam_precision;
    let mut evidence = 0.0;
    let mut ratios = Vec::with_capacity(usable.len());
    for b in &usable {
        let k = (b.v_top - b.v_bottom) / (v0 - b.v_bottom);
        let p = priors.get(b.category)?;
        let w = b.weight / total_w / (p.sigma_m * p.sigma_m);
        num += w * k * p.mu_m;
        den += w * k * k;
        evidence += w * k * k;
        ratios.push(k);
    }
    let mut flags = Vec::new();
    if evidence <= ILL_POSED_RATIO * cam_precision {
        flags.push(SolveFlag::IllPosed);
    }
    let cam_height_m = config.clamp_cam_height(num / den);
    let state = SolverState {
        cam_height_m,
        heights_m: ratios.iter().map(|k| cam_height_m * k).collect(),
    };
    Ok(linear_estimate(Method::Pgm, &problem, observation, state, flags))
}
