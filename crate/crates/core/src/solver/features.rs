use super::{DetectionBox, SolveError, SolverState};
use crate::prior::PriorTable;

/// Per-object input of the camera-height initializer:
/// `[v0, u_l, u_r, v_t, v_b, v_t - v0, v_b - v0, h_obj]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitFeatures(pub [f64; 8]);

impl InitFeatures {
    pub fn horizon(&self) -> f64 {
        self.0[0]
    }

    pub fn v_top(&self) -> f64 {
        self.0[3]
    }

    pub fn v_bottom(&self) -> f64 {
        self.0[4]
    }

    pub fn height(&self) -> f64 {
        self.0[7]
    }
}

/// Per-object input of refinement layer `j`:
/// `[v0, u_l, u_r, v_t_prev, v_b, v_t_prev - v_t, h_obj_prev, h_cam_prev]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineFeatures(pub [f64; 8]);

impl RefineFeatures {
    pub fn v_bottom(&self) -> f64 {
        self.0[4]
    }

    /// Reprojected top minus detected top.
    pub fn residual(&self) -> f64 {
        self.0[5]
    }

    pub fn height(&self) -> f64 {
        self.0[6]
    }

    pub fn cam_height(&self) -> f64 {
        self.0[7]
    }
}

pub(crate) fn init_features_with_heights(
    v0: f64,
    boxes: &[DetectionBox],
    heights: impl IntoIterator<Item = f64>,
) -> Vec<InitFeatures> {
    boxes
        .iter()
        .zip(heights)
        .map(|(b, h)| {
            InitFeatures([
                v0,
                b.u_left,
                b.u_right,
                b.v_top,
                b.v_bottom,
                b.v_top - v0,
                b.v_bottom - v0,
                h,
            ])
        })
        .collect()
}

/// Initializer features with the height slot filled by each category's prior mean.
pub fn assemble_init_features(
    v0: f64,
    boxes: &[DetectionBox],
    priors: &PriorTable,
) -> Result<Vec<InitFeatures>, SolveError> {
    if boxes.is_empty() {
        return Err(SolveError::EmptyDetections);
    }
    let means = boxes
        .iter()
        .map(|b| priors.get(b.category).map(|p| p.mu_m))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(init_features_with_heights(v0, boxes, means))
}

/// Refinement features from the previous layer's state and reprojected tops.
pub fn assemble_refine_features(
    v0: f64,
    boxes: &[DetectionBox],
    state: &SolverState,
    reprojected_v_top: &[f64],
) -> Result<Vec<RefineFeatures>, SolveError> {
    if boxes.is_empty() {
        return Err(SolveError::EmptyDetections);
    }
    for got in [state.heights_m.len(), reprojected_v_top.len()] {
        if got != boxes.len() {
            return Err(SolveError::LengthMismatch {
                expected: boxes.len(),
                got,
            });
        }
    }
    Ok(boxes
        .iter()
        .zip(&state.heights_m)
        .zip(reprojected_v_top)
        .map(|((b, &h), &vt)| {
            RefineFeatures([
                v0,
                b.u_left,
                b.u_right,
                vt,
                b.v_bottom,
                vt - b.v_top,
                h,
                state.cam_height_m,
            ])
        })
        .collect())
}
