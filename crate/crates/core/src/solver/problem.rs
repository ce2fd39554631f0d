use super::features::{assemble_refine_features, init_features_with_heights};
use super::init::aggregate_votes;
use super::{
    CalibrationUsed, DetectionBox, ExcludedBox, ExclusionReason, InitFeatures, LayerTrace, RefineFeatures,
    RefinementConfig, SceneObservation, SolveError, SolverState,
};
use crate::geometry::{GeometryError, TopProjection, VerticalModel};
use crate::pose::upright_ratio;
use crate::prior::{prior_term, Category, CategoryPrior, PriorTable};

/// Bottom rows closer than this to the horizon are not usable.
pub const MIN_HORIZON_GAP: f64 = 1e-6;

#[derive(Debug, Clone)]
pub(crate) struct ProblemObject {
    pub index: usize,
    pub det: DetectionBox,
    /// Box weight normalized to sum to one over the usable objects.
    pub weight: f64,
    pub prior: CategoryPrior,
    pub ratio: f64,
}

/// A scene prepared for optimization: usable objects with their priors,
/// the vertical camera model and the loss weights.
#[derive(Debug, Clone)]
pub struct SceneProblem {
    pub(crate) model: VerticalModel,
    pub(crate) objects: Vec<ProblemObject>,
    pub(crate) excluded: Vec<ExcludedBox>,
    pub(crate) config: RefinementConfig,
    calibration: CalibrationUsed,
}

/// Losses and per-object reprojection at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub reprojection_loss: f64,
    pub prior_loss: f64,
    pub total_loss: f64,
    pub tops: Vec<TopProjection>,
    pub residuals: Vec<f64>,
}

pub(crate) fn classify_box(b: &DetectionBox, v0: f64) -> Option<ExclusionReason> {
    if b.check().is_err() {
        return Some(ExclusionReason::InvalidBox);
    }
    let gap = b.v_bottom - v0;
    if gap.abs() <= MIN_HORIZON_GAP {
        Some(ExclusionReason::OnHorizon)
    } else if gap < 0.0 {
        Some(ExclusionReason::AboveHorizon)
    } else {
        None
    }
}

impl SceneProblem {
    pub fn new(
        observation: &SceneObservation,
        priors: &PriorTable,
        config: &RefinementConfig,
    ) -> Result<Self, SolveError> {
        config.validate()?;
        priors.validate()?;
        if observation.boxes.is_empty() {
            return Err(SolveError::EmptyDetections);
        }
        let model = VerticalModel::from_horizon(
            observation.horizon.v0,
            observation.fov_rad,
            observation.principal_v,
        )?;
        let v0 = observation.horizon.v0;

        let mut objects = Vec::new();
        let mut excluded = Vec::new();
        for (index, b) in observation.boxes.iter().enumerate() {
            if let Some(reason) = classify_box(b, v0) {
                excluded.push(ExcludedBox { index, reason });
                continue;
            }
            let prior = *priors.get(b.category)?;
            let ratio = match (&b.keypoints, config.use_upright_ratio) {
                (Some(kps), true) if b.category == Category::Person => {
                    upright_ratio(kps, &config.upright).map_or(1.0, |r| r.value())
                }
                _ => 1.0,
            };
            objects.push(ProblemObject {
                index,
                det: b.clone(),
                weight: b.weight,
                prior,
                ratio,
            });
        }
        if objects.is_empty() {
            return Err(SolveError::AllDegenerate(excluded.len()));
        }
        let total: f64 = objects.iter().map(|o| o.weight).sum();
        for o in objects.iter_mut() {
            o.weight /= total;
        }
        Ok(Self {
            model,
            objects,
            excluded,
            config: *config,
            calibration: CalibrationUsed {
                horizon_v0: v0,
                fov_rad: observation.fov_rad,
                principal_v: observation.principal_v,
            },
        })
    }

    pub fn model(&self) -> &VerticalModel {
        &self.model
    }

    pub fn config(&self) -> &RefinementConfig {
        &self.config
    }

    pub fn calibration(&self) -> CalibrationUsed {
        self.calibration
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn excluded(&self) -> &[ExcludedBox] {
        &self.excluded
    }

    pub fn object_indices(&self) -> Vec<usize> {
        self.objects.iter().map(|o| o.index).collect()
    }

    pub fn upright_ratios(&self) -> Vec<f64> {
        self.objects.iter().map(|o| o.ratio).collect()
    }

    pub(crate) fn boxes(&self) -> Vec<DetectionBox> {
        self.objects.iter().map(|o| o.det.clone()).collect()
    }

    pub fn init_features(&self) -> Vec<InitFeatures> {
        let heights = self
            .objects
            .iter()
            .map(|o| self.config.clamp_object_height(o.prior.mu_m * o.ratio));
        init_features_with_heights(self.calibration.horizon_v0, &self.boxes(), heights)
    }

    pub fn refine_features(&self, state: &SolverState) -> Result<Vec<RefineFeatures>, SolveError> {
        let tops: Vec<f64> = self.tops(state)?.iter().map(|t| t.v_top).collect();
        assemble_refine_features(self.calibration.horizon_v0, &self.boxes(), state, &tops)
    }

    /// Heights at the (ratio-scaled) prior means and the voted camera height.
    pub fn initial_state(&self) -> Result<SolverState, SolveError> {
        let features = self.init_features();
        let weights: Vec<f64> = self.objects.iter().map(|o| o.weight).collect();
        let cam_height_m = aggregate_votes(&features, &weights, &self.config)
            .ok_or(SolveError::AllDegenerate(self.excluded.len()))?;
        Ok(SolverState {
            cam_height_m,
            heights_m: features.iter().map(|f| f.height()).collect(),
        })
    }

    pub fn tops(&self, state: &SolverState) -> Result<Vec<TopProjection>, GeometryError> {
        self.objects
            .iter()
            .zip(&state.heights_m)
            .map(|(o, &h)| self.model.top_from_bottom(state.cam_height_m, h, o.det.v_bottom))
            .collect()
    }

    /// Weighted mean of absolute top-row residuals.
    pub fn reprojection_loss(&self, state: &SolverState) -> Result<f64, GeometryError> {
        let tops = self.tops(state)?;
        Ok(self
            .objects
            .iter()
            .zip(&tops)
            .map(|(o, t)| o.weight * (t.v_top - o.det.v_top).abs())
            .sum())
    }

    /// Weighted mean prior loss.
    pub fn prior_loss(&self, state: &SolverState) -> f64 {
        self.objects
            .iter()
            .zip(&state.heights_m)
            .map(|(o, &h)| o.weight * prior_term(h, &o.prior, self.config.prior_mode, o.ratio).value)
            .sum()
    }

    pub fn total_loss(&self, state: &SolverState) -> Result<f64, GeometryError> {
        Ok(self.config.alpha_reprojection * self.reprojection_loss(state)?
            + self.config.alpha_prior * self.prior_loss(state))
    }

    pub fn evaluate(&self, state: &SolverState) -> Result<Evaluation, GeometryError> {
        let tops = self.tops(state)?;
        let residuals: Vec<f64> = self
            .objects
            .iter()
            .zip(&tops)
            .map(|(o, t)| t.v_top - o.det.v_top)
            .collect();
        let reprojection_loss = self
            .objects
            .iter()
            .zip(&residuals)
            .map(|(o, r)| o.weight * r.abs())
            .sum();
        let prior_loss = self.prior_loss(state);
        Ok(Evaluation {
            reprojection_loss,
            prior_loss,
            total_loss: self.config.alpha_reprojection * reprojection_loss
                + self.config.alpha_prior * prior_loss,
            tops,
            residuals,
        })
    }

    /// Gradient of the total loss with respect to `(h_cam, h_1, .., h_N)`.
    /// Residuals that are exactly zero contribute no reprojection gradient.
    pub fn gradient(&self, state: &SolverState) -> Result<Vec<f64>, GeometryError> {
        let eval = self.evaluate(state)?;
        let a1 = self.config.alpha_reprojection;
        let a2 = self.config.alpha_prior;
        let mut grad = vec![0.0; self.objects.len() + 1];
        for (i, o) in self.objects.iter().enumerate() {
            let sign = eval.residuals[i].signum() * (eval.residuals[i] != 0.0) as i32 as f64;
            let top = &eval.tops[i];
            let p = prior_term(state.heights_m[i], &o.prior, self.config.prior_mode, o.ratio);
            grad[0] += a1 * o.weight * sign * top.d_cam_height;
            grad[i + 1] = a1 * o.weight * sign * top.d_obj_height + a2 * o.weight * p.grad;
        }
        Ok(grad)
    }

    pub(crate) fn trace(
        &self,
        layer: usize,
        state: &SolverState,
        step_accepted: bool,
    ) -> Result<LayerTrace, GeometryError> {
        let eval = self.evaluate(state)?;
        Ok(LayerTrace {
            layer,
            cam_height_m: state.cam_height_m,
            heights_m: state.heights_m.clone(),
            reprojection_loss: eval.reprojection_loss,
            prior_loss: eval.prior_loss,
            total_loss: eval.total_loss,
            reprojected_v_top: eval.tops.iter().map(|t| t.v_top).collect(),
            residuals: eval.residuals,
            step_accepted,
        })
    }
}

/// Per-object top-row residuals of `boxes` under `model`, with bottoms pinned
/// to the detected rows. Objects that cannot be reprojected (bottom on or
/// above the horizon, singular top) are skipped and listed in `excluded`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReprojectionLoss {
    pub residuals: Vec<f64>,
    pub included: Vec<usize>,
    pub excluded: Vec<usize>,
    /// Mean absolute residual over the included objects.
    pub loss: f64,
}

pub fn reprojection_loss(
    model: &VerticalModel,
    cam_height_m: f64,
    heights_m: &[f64],
    boxes: &[DetectionBox],
) -> ReprojectionLoss {
    let mut out = ReprojectionLoss {
        residuals: Vec::new(),
        included: Vec::new(),
        excluded: Vec::new(),
        loss: 0.0,
    };
    for (i, (b, &h)) in boxes.iter().zip(heights_m).enumerate() {
        match model.top_from_bottom(cam_height_m, h, b.v_bottom) {
            Ok(t) => {
                out.residuals.push(t.v_top - b.v_top);
                out.included.push(i);
            }
            Err(_) => out.excluded.push(i),
        }
    }
    if !out.residuals.is_empty() {
        out.loss = out.residuals.iter().map(|r| r.abs()).sum::<f64>() / out.residuals.len() as f64;
    }
    out
}
