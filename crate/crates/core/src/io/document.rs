use super::IoError;
use crate::geometry::{focal_from_fov, HorizonEstimate};
use crate::pose::KeypointSet;
use crate::solver::{DetectionBox, SceneObservation};
use crate::synth::{GroundTruth, SceneSpec};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Normalized coordinates beyond this magnitude are taken to be pixels.
const MAX_NORMALIZED: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageSize {
    pub width_px: f64,
    pub height_px: f64,
}

/// Direction in which the vertical image coordinate grows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerticalAxis {
    #[default]
    Down,
    /// `v_up = 1 - v_down`; `v_top` is then the larger of the two rows.
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoordinateUnits {
    /// Divided by the image height.
    #[default]
    Normalized,
    Pixels,
}

/// Camera calibration: the field of view plus exactly one of the horizon row
/// or the pitch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub fov_rad: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pitch_rad: Option<f64>,
    /// Principal row; the image center when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub principal_v: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionDocument {
    pub schema_version: u32,
    pub image: ImageSize,
    #[serde(default)]
    pub units: CoordinateUnits,
    #[serde(default)]
    pub vertical_axis: VerticalAxis,
    pub calibration: Calibration,
    pub detections: Vec<DetectionBox>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
}

fn check_schema_version(found: u32) -> Result<(), IoError> {
    if found == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(IoError::SchemaVersion {
            found,
            expected: SCHEMA_VERSION,
        })
    }
}

impl DetectionDocument {
    /// Parses and validates a document.
    pub fn parse(bytes: &[u8]) -> Result<Self, IoError> {
        let doc: Self = serde_json::from_slice(bytes)?;
        doc.validate()?;
        Ok(doc)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("documents serialize");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), IoError> {
        check_schema_version(self.schema_version)?;
        let schema = |m: String| Err(IoError::Schema(m));
        if !(self.image.width_px > 0.0 && self.image.height_px > 0.0) {
            return schema("image dimensions must be positive".into());
        }
        let cal = &self.calibration;
        match (cal.horizon_v, cal.pitch_rad) {
            (Some(_), Some(_)) | (None, None) => {
                return schema("calibration: give exactly one of `horizon_v` or `pitch_rad`".into())
            }
            _ => {}
        }
        if cal.fov_rad >= std::f64::consts::PI && cal.fov_rad < 180.0 {
            return Err(IoError::Units(format!(
                "calibration.fov_rad = {} is not below pi; it looks like degrees",
                cal.fov_rad
            )));
        }
        if !(cal.fov_rad > 0.0 && cal.fov_rad < std::f64::consts::PI) {
            return schema(format!(
                "calibration.fov_rad = {} must lie in (0, pi)",
                cal.fov_rad
            ));
        }
        if let Some(p) = cal.pitch_rad {
            if !(p.abs() < std::f64::consts::FRAC_PI_2) {
                return Err(IoError::Units(format!(
                    "calibration.pitch_rad = {p} is not within (-pi/2, pi/2); degrees?"
                )));
            }
        }
        if self.units == CoordinateUnits::Normalized {
            let coords = self
                .detections
                .iter()
                .enumerate()
                .flat_map(|(i, d)| [d.u_left, d.u_right, d.v_top, d.v_bottom].map(move |c| (i, c)));
            let extra = [cal.horizon_v, cal.principal_v]
                .into_iter()
                .flatten()
                .map(|c| (usize::MAX, c));
            for (i, c) in coords.chain(extra) {
                if c.abs() > MAX_NORMALIZED {
                    let what = if i == usize::MAX {
                        "calibration".to_string()
                    } else {
                        format!("detection {i}")
                    };
                    return Err(IoError::Units(format!(
                        "{what} has coordinate {c}, too large for normalized units; set \"units\": \"pixels\""
                    )));
                }
            }
        }
        if let Some(gt) = &self.ground_truth {
            if gt.heights_m.len() != self.detections.len() {
                return schema(format!(
                    "ground_truth.heights_m has {} entries for {} detections",
                    gt.heights_m.len(),
                    self.detections.len()
                ));
            }
        }
        Ok(())
    }

    /// Maps a vertical coordinate of this document to normalized, rows-down.
    fn to_canonical_v(&self, v: f64) -> f64 {
        let v = match self.units {
            CoordinateUnits::Normalized => v,
            CoordinateUnits::Pixels => v / self.image.height_px,
        };
        match self.vertical_axis {
            VerticalAxis::Down => v,
            VerticalAxis::Up => 1.0 - v,
        }
    }

    fn to_canonical_u(&self, u: f64) -> f64 {
        match self.units {
            CoordinateUnits::Normalized => u,
            CoordinateUnits::Pixels => u / self.image.height_px,
        }
    }

    fn canonical_box(&self, d: &DetectionBox) -> DetectionBox {
        let mut b = d.clone();
        b.u_left = self.to_canonical_u(d.u_left);
        b.u_right = self.to_canonical_u(d.u_right);
        b.v_top = self.to_canonical_v(d.v_top);
        b.v_bottom = self.to_canonical_v(d.v_bottom);
        b.keypoints = d
            .keypoints
            .as_ref()
            .map(|k| k.map_coords(|u, v| (self.to_canonical_u(u), self.to_canonical_v(v))));
        b
    }

    /// Estimator input in normalized, rows-down coordinates.
    pub fn observation(&self) -> Result<SceneObservation, IoError> {
        self.validate()?;
        let cal = &self.calibration;
        let principal_v = cal.principal_v.map_or(0.5, |p| self.to_canonical_v(p));
        let v0 = match (cal.horizon_v, cal.pitch_rad) {
            (Some(v), _) => self.to_canonical_v(v),
            (None, Some(pitch)) => principal_v + focal_from_fov(cal.fov_rad, 1.0)? * pitch.tan(),
            (None, None) => unreachable!("validated"),
        };
        Ok(SceneObservation {
            horizon: HorizonEstimate { v0 },
            fov_rad: cal.fov_rad,
            principal_v,
            boxes: self.detections.iter().map(|d| self.canonical_box(d)).collect(),
        })
    }

    /// Document describing a synthetic scene and its rendered observation.
    pub fn from_scene(scene: &SceneSpec, observation: &SceneObservation) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            image: ImageSize {
                width_px: scene.camera.image_w_px,
                height_px: scene.camera.image_h_px,
            },
            units: CoordinateUnits::Normalized,
            vertical_axis: VerticalAxis::Down,
            calibration: Calibration {
                fov_rad: observation.fov_rad,
                horizon_v: Some(observation.horizon.v0),
                pitch_rad: None,
                principal_v: Some(observation.principal_v),
            },
            detections: observation.boxes.clone(),
            ground_truth: Some(scene.truth()),
        }
    }

    /// The same document with every vertical coordinate expressed rows-up.
    pub fn flipped_vertical(&self) -> Self {
        let flip = |v: f64| match self.units {
            CoordinateUnits::Normalized => 1.0 - v,
            CoordinateUnits::Pixels => self.image.height_px - v,
        };
        let mut out = self.clone();
        out.vertical_axis = match self.vertical_axis {
            VerticalAxis::Down => VerticalAxis::Up,
            VerticalAxis::Up => VerticalAxis::Down,
        };
        out.calibration.horizon_v = self.calibration.horizon_v.map(flip);
        out.calibration.principal_v = self.calibration.principal_v.map(flip);
        for d in out.detections.iter_mut() {
            d.v_top = flip(d.v_top);
            d.v_bottom = flip(d.v_bottom);
            d.keypoints = d
                .keypoints
                .as_ref()
                .map(|k: &KeypointSet| k.map_coords(|u, v| (u, flip(v))));
        }
        out
    }
}
