//! Camera-height and object-height estimation from detections and a horizon.
//!
//! The pipeline initializes the camera height from per-object votes, then
//! runs a fixed number of refinement layers. Each layer reads the current
//! reprojection residuals and takes one damped Gauss-Newton step on the
//! weighted sum of the reprojection loss and the height prior loss.

mod features;
mod init;
mod problem;
mod refine;

pub use features::{assemble_init_features, assemble_refine_features, InitFeatures, RefineFeatures};
pub use init::{camera_height_votes, init_camera_height};
pub use problem::{reprojection_loss, Evaluation, ReprojectionLoss, SceneProblem, MIN_HORIZON_GAP};
pub use refine::{refine_layer, RefineOutcome};

use crate::geometry::{GeometryError, HorizonEstimate, ImageVerticalSpan};
use crate::pose::{KeypointSet, UprightConfig};
use crate::prior::{Category, PriorError, PriorMode, PriorTable};
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("no detections to solve for")]
    EmptyDetections,
    #[error("every detection is degenerate ({0} excluded)")]
    AllDegenerate(usize),
    #[error("expected {expected} entries, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn one() -> f64 {
    1.0
}

/// A 2D detection. Coordinates are normalized by image height, rows grow
/// downward.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionBox {
    pub category: Category,
    pub u_left: f64,
    pub u_right: f64,
    pub v_top: f64,
    pub v_bottom: f64,
    #[serde(default = "one")]
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keypoints: Option<KeypointSet>,
}

impl DetectionBox {
    pub fn new(category: Category, u_left: f64, v_top: f64, u_right: f64, v_bottom: f64) -> Self {
        Self {
            category,
            u_left,
            u_right,
            v_top,
            v_bottom,
            weight: 1.0,
            keypoints: None,
        }
    }

    pub fn with_keypoints(mut self, keypoints: KeypointSet) -> Self {
        self.keypoints = Some(keypoints);
        self
    }

    pub fn span(&self) -> ImageVerticalSpan {
        ImageVerticalSpan {
            v_top: self.v_top,
            v_bottom: self.v_bottom,
        }
    }

    pub fn height(&self) -> f64 {
        self.v_bottom - self.v_top
    }

    pub fn width(&self) -> f64 {
        self.u_right - self.u_left
    }

    /// Checks the ordering and finiteness invariants.
    pub fn check(&self) -> Result<(), String> {
        let coords = [self.u_left, self.u_right, self.v_top, self.v_bottom, self.weight];
        if coords.iter().any(|c| !c.is_finite()) {
            return Err("coordinates and weight must be finite".into());
        }
        if self.u_left >= self.u_right {
            return Err(format!(
                "u_left {} must be < u_right {}",
                self.u_left, self.u_right
            ));
        }
        if self.v_top >= self.v_bottom {
            return Err(format!(
                "v_top {} must be < v_bottom {}",
                self.v_top, self.v_bottom
            ));
        }
        if self.weight <= 0.0 {
            return Err(format!("weight {} must be positive", self.weight));
        }
        Ok(())
    }
}

fn half() -> f64 {
    0.5
}

/// Everything the estimators consume for one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneObservation {
    pub horizon: HorizonEstimate,
    pub fov_rad: f64,
    #[serde(default = "half")]
    pub principal_v: f64,
    pub boxes: Vec<DetectionBox>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum Method {
    #[default]
    #[serde(rename = "scalenet")]
    ScaleNet,
    #[serde(rename = "pgm")]
    Pgm,
    #[serde(rename = "pgm-fixed")]
    PgmFixed,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::ScaleNet, Method::Pgm, Method::PgmFixed];

    pub fn name(self) -> &'static str {
        match self {
            Method::ScaleNet => "scalenet",
            Method::Pgm => "pgm",
            Method::PgmFixed => "pgm-fixed",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL.into_iter().find(|m| m.name() == s).ok_or_else(|| {
            let valid: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
            format!("unknown method `{s}`; valid methods: {}", valid.join(", "))
        })
    }
}

/// Knobs of the refinement cascade.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RefinementConfig {
    /// Number of refinement layers after initialization.
    pub num_layers: usize,
    /// Weight of the reprojection loss.
    pub alpha_reprojection: f64,
    /// Weight of the height prior loss.
    pub alpha_prior: f64,
    /// Initial Levenberg-Marquardt damping.
    pub damping: f64,
    pub max_backtracks: usize,
    /// A layer whose loss decrease is below this counts as converged.
    pub tolerance: f64,
    pub prior_mode: PriorMode,
    pub cam_height_bounds: [f64; 2],
    pub object_height_bounds: [f64; 2],
    /// Apply the prior to upright heights of people with keypoints.
    pub use_upright_ratio: bool,
    pub upright: UprightConfig,
}

impl Default for RefinementConfig {
    fn default() -> Self {
        Self {
            num_layers: 3,
            alpha_reprojection: 1.0,
            alpha_prior: 0.1,
            damping: 1e-3,
            max_backtracks: 20,
            tolerance: 1e-10,
            prior_mode: PriorMode::LogDensity,
            cam_height_bounds: [0.1, 50.0],
            object_height_bounds: [0.1, 10.0],
            use_upright_ratio: false,
            upright: UprightConfig::default(),
        }
    }
}

impl RefinementConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |m: String| Err(SolveError::InvalidConfig(m));
        if !(self.alpha_reprojection >= 0.0 && self.alpha_prior >= 0.0) {
            return bad("loss weights must be non-negative".into());
        }
        if !(self.damping > 0.0 && self.damping.is_finite()) {
            return bad(format!("damping {} must be positive", self.damping));
        }
        for (name, [lo, hi]) in [
            ("cam_height_bounds", self.cam_height_bounds),
            ("object_height_bounds", self.object_height_bounds),
        ] {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return bad(format!("{name} must satisfy 0 < min < max, got [{lo}, {hi}]"));
            }
        }
        Ok(())
    }

    pub fn clamp_cam_height(&self, h: f64) -> f64 {
        h.clamp(self.cam_height_bounds[0], self.cam_height_bounds[1])
    }

    pub fn clamp_object_height(&self, h: f64) -> f64 {
        h.clamp(self.object_height_bounds[0], self.object_height_bounds[1])
    }
}

/// Camera height and the heights of the usable objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverState {
    pub cam_height_m: f64,
    pub heights_m: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExclusionReason {
    InvalidBox,
    AboveHorizon,
    OnHorizon,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedBox {
    pub index: usize,
    pub reason: ExclusionReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveFlag {
    /// The objects carry no scale information; the answer is the camera prior.
    IllPosed,
    /// Iteration cap reached before the convergence tolerance.
    NotConverged,
}

/// Snapshot of one layer. Layer 0 is the initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerTrace {
    pub layer: usize,
    pub cam_height_m: f64,
    pub heights_m: Vec<f64>,
    pub reprojection_loss: f64,
    pub prior_loss: f64,
    /// Objective the method minimizes at this state.
    pub total_loss: f64,
    pub reprojected_v_top: Vec<f64>,
    /// `reprojected_v_top - v_top_det`, per object.
    pub residuals: Vec<f64>,
    pub step_accepted: bool,
}

/// Calibration the estimate was computed under (normalized, rows down).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationUsed {
    pub horizon_v0: f64,
    pub fov_rad: f64,
    pub principal_v: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEstimate {
    pub method: Method,
    pub calibration: CalibrationUsed,
    pub cam_height_m: f64,
    /// Actual (posed) heights of the usable objects.
    pub heights_m: Vec<f64>,
    /// Input index of each entry of `heights_m`.
    pub object_indices: Vec<usize>,
    /// Upright ratio applied per object (1 when unused).
    pub upright_ratios: Vec<f64>,
    pub excluded: Vec<ExcludedBox>,
    pub trace: Vec<LayerTrace>,
    #[serde(default)]
    pub flags: Vec<SolveFlag>,
}

impl SceneEstimate {
    /// Number of boxes in the input the estimate was computed from.
    pub fn num_inputs(&self) -> usize {
        self.heights_m.len() + self.excluded.len()
    }

    pub fn final_layer(&self) -> &LayerTrace {
        self.trace
            .last()
            .expect("estimate has at least the initial layer")
    }

    /// Rewrites input indices through `map` (e.g. after filtering).
    pub fn remap_indices(&mut self, map: &[usize]) {
        for i in self.object_indices.iter_mut() {
            *i = map[*i];
        }
        for e in self.excluded.iter_mut() {
            e.index = map[e.index];
        }
    }
}

/// Full estimation: initialization followed by `config.num_layers`
/// refinement layers.
pub fn solve_scene(
    observation: &SceneObservation,
    priors: &PriorTable,
    config: &RefinementConfig,
) -> Result<SceneEstimate, SolveError> {
    let problem = SceneProblem::new(observation, priors, config)?;
    let mut state = problem.initial_state()?;
    let mut trace = vec![problem.trace(0, &state, true)?];
    let mut converged = config.num_layers == 0;
    for layer in 1..=config.num_layers {
        let outcome = refine_layer(&problem, &state)?;
        converged = outcome.converged;
        state = outcome.state;
        trace.push(problem.trace(layer, &state, outcome.accepted)?);
    }
    let mut flags = Vec::new();
    if !converged {
        flags.push(SolveFlag::NotConverged);
    }
    Ok(SceneEstimate {
        method: Method::ScaleNet,
        calibration: problem.calibration(),
        cam_height_m: state.cam_height_m,
        heights_m: state.heights_m,
        object_indices: problem.object_indices(),
        upright_ratios: problem.upright_ratios(),
        excluded: problem.excluded().to_vec(),
        trace,
        flags,
    })
}
