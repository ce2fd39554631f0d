//! Synthetic scenes with known camera and object heights.
//!
//! All randomness comes from ChaCha8 seeded with `seed_from_u64(seed)`.
//! Scene sampling draws from stream 0 and rendering noise from stream 1, so
//! noise settings never change the sampled geometry.

use crate::geometry::{
    horizon_from_pitch, project_vertical, projection_oracle, CameraParams, GeometryError, GroundObject,
    HorizonEstimate,
};
use crate::prior::{Category, PriorError, PriorTable};
use crate::solver::{DetectionBox, SceneObservation};
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

const MAX_ATTEMPTS: usize = 1000;
const MAX_NOISE_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SynthError {
    #[error("a scene needs at least one object")]
    NoObjects,
    #[error("invalid range `{name}`: {reason}")]
    InvalidRange { name: &'static str, reason: String },
    #[error("could not place {what} within the frame after {attempts} attempts")]
    Infeasible { what: &'static str, attempts: usize },
    #[error(transparent)]
    Prior(#[from] PriorError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// How ground-truth object heights are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum HeightModel {
    /// Drawn from the category prior.
    #[default]
    Sampled,
    /// Exactly the category prior mean.
    Mean,
    /// The mean shifted by `sigmas` standard deviations with a random sign.
    Deviation { sigmas: f64 },
}

/// Sampling ranges. Angles in degrees, lengths in meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneRanges {
    pub pitch_deg: [f64; 2],
    pub fov_deg: [f64; 2],
    pub cam_height_m: [f64; 2],
    pub depth_m: [f64; 2],
    pub image_w_px: f64,
    pub image_h_px: f64,
    /// Probability that an object is a person; the rest are cars.
    pub person_fraction: f64,
    /// Smallest accepted box height, normalized.
    pub min_box_height: f64,
    pub heights: HeightModel,
    pub priors: PriorTable,
}

impl Default for SceneRanges {
    fn default() -> Self {
        Self {
            pitch_deg: [-30.0, 30.0],
            fov_deg: [30.0, 100.0],
            cam_height_m: [0.5, 10.0],
            depth_m: [1.0, 80.0],
            image_w_px: 640.0,
            image_h_px: 512.0,
            person_fraction: 0.7,
            min_box_height: 0.02,
            heights: HeightModel::Sampled,
            priors: PriorTable::default(),
        }
    }
}

impl SceneRanges {
    pub fn persons_only(mut self) -> Self {
        self.person_fraction = 1.0;
        self
    }

    pub fn with_heights(mut self, heights: HeightModel) -> Self {
        self.heights = heights;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let interval = |name: &'static str, [lo, hi]: [f64; 2], min: f64, max: f64| {
            if lo.is_finite() && hi.is_finite() && lo <= hi && lo > min && hi < max {
                Ok(())
            } else {
                Err(SynthError::InvalidRange {
                    name,
                    reason: format!("[{lo}, {hi}] must be ordered within ({min}, {max})"),
                })
            }
        };
        interval("pitch_deg", self.pitch_deg, -90.0, 90.0)?;
        interval("fov_deg", self.fov_deg, 0.0, 180.0)?;
        interval("cam_height_m", self.cam_height_m, 0.0, f64::INFINITY)?;
        interval("depth_m", self.depth_m, 0.0, f64::INFINITY)?;
        if !(self.image_w_px > 0.0 && self.image_h_px > 0.0) {
            return Err(SynthError::InvalidRange {
                name: "image size",
                reason: "dimensions must be positive".into(),
            });
        }
        if !(0.0..=1.0).contains(&self.person_fraction) {
            return Err(SynthError::InvalidRange {
                name: "person_fraction",
                reason: format!("{} is not a probability", self.person_fraction),
            });
        }
        if !(0.0..1.0).contains(&self.min_box_height) {
            return Err(SynthError::InvalidRange {
                name: "min_box_height",
                reason: format!("{} must lie in [0, 1)", self.min_box_height),
            });
        }
        self.priors.validate()?;
        Ok(())
    }
}

/// Perturbations applied when rendering detections.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseModel {
    /// Standard deviation on each box coordinate, normalized.
    pub box_sigma: f64,
    /// Standard deviation on the horizon row, normalized.
    pub horizon_sigma: f64,
    pub fov_sigma_rad: f64,
    /// Fraction of objects whose height is drawn uniformly from `[0.5 mu, 1.5 mu]`.
    pub height_outlier_rate: f64,
}

impl NoiseModel {
    pub fn boxes(box_sigma: f64) -> Self {
        Self {
            box_sigma,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fields = [
            ("box_sigma", self.box_sigma),
            ("horizon_sigma", self.horizon_sigma),
            ("fov_sigma_rad", self.fov_sigma_rad),
        ];
        for (name, v) in fields {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(SynthError::InvalidRange {
                    name,
                    reason: format!("{v} must be non-negative"),
                });
            }
        }
        if !(0.0..=1.0).contains(&self.height_outlier_rate) {
            return Err(SynthError::InvalidRange {
                name: "height_outlier_rate",
                reason: format!("{} is not a probability", self.height_outlier_rate),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub camera: CameraParams,
    pub objects: Vec<GroundObject>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub cam_height_m: f64,
    pub heights_m: Vec<f64>,
}

impl SceneSpec {
    pub fn horizon(&self) -> HorizonEstimate {
        horizon_from_pitch(&self.camera)
    }

    pub fn truth(&self) -> GroundTruth {
        GroundTruth {
            cam_height_m: self.camera.cam_height_m,
            heights_m: self.objects.iter().map(|o| o.height_m).collect(),
        }
    }

    /// Same scene with camera height, depths, lateral offsets and sizes
    /// multiplied by `lambda`; its image is unchanged.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut out = self.clone();
        out.camera.cam_height_m *= lambda;
        for o in out.objects.iter_mut() {
            o.depth_m *= lambda;
            o.lateral_m *= lambda;
            o.height_m *= lambda;
            o.width_m *= lambda;
        }
        out
    }
}

pub fn default_width(category: Category) -> f64 {
    match category {
        Category::Person => 0.5,
        Category::Car => 1.8,
        Category::Other => 1.0,
    }
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

/// Depths at which an object of ordinary size can appear in frame: the
/// ground point must project above the bottom edge and a 1.5 m object must
/// still reach the minimum box height.
fn visible_depths(camera: &CameraParams, ranges: &SceneRanges) -> Option<[f64; 2]> {
    let model = camera.vertical_model();
    let near = model.depth_from_bottom(camera.cam_height_m, 1.0).ok()?;
    let far = model.focal() * 1.5 / ranges.min_box_height.max(1e-3);
    let lo = ranges.depth_m[0].max(near);
    let hi = ranges.depth_m[1].min(far);
    (lo < hi).then_some([lo, hi])
}

fn sample_camera(ranges: &SceneRanges, rng: &mut ChaCha8Rng) -> Result<(CameraParams, [f64; 2]), SynthError> {
    for _ in 0..MAX_ATTEMPTS {
        let cam = CameraParams::new(
            uniform(rng, ranges.pitch_deg).to_radians(),
            uniform(rng, ranges.fov_deg).to_radians(),
            uniform(rng, ranges.cam_height_m),
            ranges.image_w_px,
            ranges.image_h_px,
        )?;
        if let Some(depths) = visible_depths(&cam, ranges) {
            return Ok((cam, depths));
        }
    }
    Err(SynthError::Infeasible {
        what: "a camera with visible ground",
        attempts: MAX_ATTEMPTS,
    })
}

/// Noiseless normalized box of an object: the closed-form vertical span and
/// the oracle projection of its ground-contact corners.
pub fn exact_box(camera: &CameraParams, object: &GroundObject) -> Result<DetectionBox, GeometryError> {
    let span = project_vertical(camera, object)?;
    let h = camera.image_h_px;
    let half = 0.5 * object.width_m;
    let mut u = [0.0; 4];
    for (k, (dx, y)) in [
        (-half, 0.0),
        (half, 0.0),
        (-half, object.height_m),
        (half, object.height_m),
    ]
    .into_iter()
    .enumerate()
    {
        let p = Point3::new(object.lateral_m + dx, y, object.depth_m);
        u[k] = projection_oracle(camera, p)?.0 / h;
    }
    let u_left = u.iter().copied().fold(f64::INFINITY, f64::min);
    let u_right = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(DetectionBox::new(
        object.category,
        u_left,
        span.v_top,
        u_right,
        span.v_bottom,
    ))
}

fn in_frame(b: &DetectionBox, camera: &CameraParams, v0: f64, min_height: f64) -> bool {
    let width = camera.image_w_px / camera.image_h_px;
    b.v_top >= 0.0
        && b.v_bottom <= 1.0
        && b.u_left >= 0.0
        && b.u_right <= width
        && b.v_bottom > v0 + 1e-6
        && b.height() >= min_height
}

fn sample_height(
    ranges: &SceneRanges,
    category: Category,
    outlier_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64, SynthError> {
    let prior = ranges.priors.get(category)?;
    if outlier_rate > 0.0 && rng.random_bool(outlier_rate) {
        return Ok(rng.random_range(0.5 * prior.mu_m..1.5 * prior.mu_m));
    }
    let h = match ranges.heights {
        HeightModel::Sampled => loop {
            let h = Normal::new(prior.mu_m, prior.sigma_m)
                .expect("validated prior")
                .sample(rng);
            if h > 0.0 {
                break h;
            }
        },
        HeightModel::Mean => prior.mu_m,
        HeightModel::Deviation { sigmas } => {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            prior.mu_m + sign * sigmas * prior.sigma_m
        }
    };
    Ok(h)
}

/// Scene with `n_objects` objects, each fully visible and below the horizon.
pub fn sample_scene(ranges: &SceneRanges, n_objects: usize, seed: u64) -> Result<SceneSpec, SynthError> {
    sample_scene_with_outliers(ranges, n_objects, 0.0, seed)
}

fn place_objects(
    ranges: &SceneRanges,
    camera: &CameraParams,
    [near, far]: [f64; 2],
    n_objects: usize,
    outlier_rate: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<GroundObject>, SynthError> {
    let v0 = horizon_from_pitch(camera).v0;
    let (ln_lo, ln_hi) = (near.ln(), far.ln());
    let mut objects = Vec::with_capacity(n_objects);
    for _ in 0..n_objects {
        let category = if rng.random_bool(ranges.person_fraction) {
            Category::Person
        } else {
            Category::Car
        };
        let height_m = sample_height(ranges, category, outlier_rate, rng)?;
        let width_m = default_width(category);
        let mut placed = None;
        for _ in 0..MAX_ATTEMPTS {
            let depth_m = uniform(rng, [ln_lo, ln_hi]).exp();
            // lateral offset drawn across the horizontal field of view at this depth
            let half_fov = 0.5 * camera.image_w_px / camera.focal_px * depth_m;
            let lateral_m = uniform(rng, [-half_fov, half_fov]);
            let object = GroundObject {
                depth_m,
                lateral_m,
                height_m,
                width_m,
                category,
            };
            if matches!(exact_box(camera, &object), Ok(b) if in_frame(&b, camera, v0, ranges.min_box_height))
            {
                placed = Some(object);
                break;
            }
        }
        objects.push(placed.ok_or(SynthError::Infeasible {
            what: "an object",
            attempts: MAX_ATTEMPTS,
        })?);
    }
    Ok(objects)
}

/// Like [`sample_scene`], with a fraction of objects given outlier heights.
/// A camera under which some object cannot be placed is discarded and
/// resampled.
pub fn sample_scene_with_outliers(
    ranges: &SceneRanges,
    n_objects: usize,
    outlier_rate: f64,
    seed: u64,
) -> Result<SceneSpec, SynthError> {
    ranges.validate()?;
    if n_objects == 0 {
        return Err(SynthError::NoObjects);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut last = None;
    for _ in 0..MAX_ATTEMPTS {
        let (camera, depths) = sample_camera(ranges, &mut rng)?;
        match place_objects(ranges, &camera, depths, n_objects, outlier_rate, &mut rng) {
            Ok(objects) => {
                return Ok(SceneSpec {
                    camera,
                    objects,
                    seed,
                })
            }
            Err(e) => last = Some(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

fn perturb(b: &DetectionBox, sigma: f64, rng: &mut ChaCha8Rng) -> DetectionBox {
    if sigma == 0.0 {
        return b.clone();
    }
    let normal = Normal::new(0.0, sigma).expect("validated sigma");
    for _ in 0..MAX_NOISE_RESAMPLES {
        let mut out = b.clone();
        out.u_left += normal.sample(rng);
        out.u_right += normal.sample(rng);
        out.v_top += normal.sample(rng);
        out.v_bottom += normal.sample(rng);
        if out.u_left < out.u_right && out.v_top < out.v_bottom {
            return out;
        }
    }
    b.clone()
}

/// Detection boxes of every object, in object order.
pub fn render_detections(scene: &SceneSpec, noise: &NoiseModel) -> Result<Vec<DetectionBox>, SynthError> {
    noise.validate()?;
    let mut rng = noise_rng(scene.seed);
    scene
        .objects
        .iter()
        .map(|o| Ok(perturb(&exact_box(&scene.camera, o)?, noise.box_sigma, &mut rng)))
        .collect()
}

/// Full estimator input: rendered boxes plus a (possibly perturbed) horizon
/// and field of view. Horizon and field-of-view noise are drawn after the
/// box noise, so they never change the boxes.
pub fn observe(scene: &SceneSpec, noise: &NoiseModel) -> Result<SceneObservation, SynthError> {
    let boxes = render_detections(scene, noise)?;
    let mut rng = noise_rng(scene.seed);
    rng.set_word_pos(1 << 40);
    let h = scene.camera.image_h_px;
    let mut v0 = scene.horizon().v0;
    let mut fov = scene.camera.fov_rad;
    if noise.horizon_sigma > 0.0 {
        v0 += Normal::new(0.0, noise.horizon_sigma)
            .expect("validated")
            .sample(&mut rng);
    }
    if noise.fov_sigma_rad > 0.0 {
        let perturbed = fov
            + Normal::new(0.0, noise.fov_sigma_rad)
                .expect("validated")
                .sample(&mut rng);
        fov = perturbed.clamp(1e-3, std::f64::consts::PI - 1e-3);
    }
    Ok(SceneObservation {
        horizon: HorizonEstimate { v0 },
        fov_rad: fov,
        principal_v: scene.camera.principal_v_px / h,
        boxes,
    })
}

/// Sampled scene and its observation in one call.
pub fn generate(
    ranges: &SceneRanges,
    noise: &NoiseModel,
    n_objects: usize,
    seed: u64,
) -> Result<(SceneSpec, SceneObservation), SynthError> {
    noise.validate()?;
    let scene = sample_scene_with_outliers(ranges, n_objects, noise.height_outlier_rate, seed)?;
    let observation = observe(&scene, noise)?;
    Ok((scene, observation))
}
