use super::IoError;
use crate::prior::Category;
use crate::solver::{DetectionBox, SceneObservation};
use serde::{Deserialize, Serialize};

/// Ingestion filters. The defaults are working values, not published ones.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterThresholds {
    /// Allowed height / width of person boxes.
    pub person_aspect: [f64; 2],
    /// Allowed normalized box height, all categories.
    pub box_height: [f64; 2],
    /// Reject people whose keypoints show the head or an ankle hidden.
    pub require_amodal: bool,
}

impl Default for FilterThresholds {
    fn default() -> Self {
        Self {
            person_aspect: [1.2, 6.0],
            box_height: [0.05, 0.95],
            require_amodal: true,
        }
    }
}

impl FilterThresholds {
    /// Thresholds that keep every well-formed box below the horizon.
    pub fn permissive() -> Self {
        Self {
            person_aspect: [0.0, f64::INFINITY],
            box_height: [0.0, f64::INFINITY],
            require_amodal: false,
        }
    }

    pub fn validate(&self) -> Result<(), IoError> {
        for (name, [lo, hi]) in [
            ("person_aspect", self.person_aspect),
            ("box_height", self.box_height),
        ] {
            if !(lo >= 0.0 && lo <= hi) {
                return Err(IoError::Config(format!(
                    "filter.{name} must satisfy 0 <= min <= max"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RejectionReason {
    /// Malformed box (non-finite, inverted or non-positive weight).
    Invalid,
    /// Head or ankles not visible, so the box may not cover the whole person.
    Amodal,
    Aspect,
    Size,
    AboveHorizon,
}

impl RejectionReason {
    /// Name used in documents.
    pub fn name(self) -> &'static str {
        match self {
            Self::Invalid => "invalid",
            Self::Amodal => "amodal",
            Self::Aspect => "aspect",
            Self::Size => "size",
            Self::AboveHorizon => "above-horizon",
        }
    }
}

impl std::fmt::Display for RejectionReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedDetection {
    pub index: usize,
    pub reason: RejectionReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutcome {
    /// Input indices of the kept boxes, in input order.
    pub kept: Vec<usize>,
    pub rejected: Vec<RejectedDetection>,
}

impl FilterOutcome {
    /// The observation restricted to the kept boxes.
    pub fn apply(&self, observation: &SceneObservation) -> SceneObservation {
        SceneObservation {
            boxes: self.kept.iter().map(|&i| observation.boxes[i].clone()).collect(),
            ..observation.clone()
        }
    }
}

fn reject_reason(b: &DetectionBox, v0: f64, t: &FilterThresholds) -> Option<RejectionReason> {
    if b.check().is_err() {
        return Some(RejectionReason::Invalid);
    }
    if b.category == Category::Person {
        if let (true, Some(kps)) = (t.require_amodal, &b.keypoints) {
            if !(kps.head_visible() && kps.both_ankles_visible()) {
                return Some(RejectionReason::Amodal);
            }
        }
        let aspect = b.height() / b.width();
        if aspect < t.person_aspect[0] || aspect > t.person_aspect[1] {
            return Some(RejectionReason::Aspect);
        }
    }
    if b.height() < t.box_height[0] || b.height() > t.box_height[1] {
        return Some(RejectionReason::Size);
    }
    if b.v_bottom <= v0 + crate::solver::MIN_HORIZON_GAP {
        return Some(RejectionReason::AboveHorizon);
    }
    None
}

/// Splits the boxes of `observation` into kept and rejected. Rules are
/// checked in the order of [`RejectionReason`]; the first failing rule is
/// reported.
pub fn filter_detections(observation: &SceneObservation, thresholds: &FilterThresholds) -> FilterOutcome {
    let mut out = FilterOutcome {
        kept: Vec::new(),
        rejected: Vec::new(),
    };
    for (index, b) in observation.boxes.iter().enumerate() {
        match reject_reason(b, observation.horizon.v0, thresholds) {
            Some(reason) => out.rejected.push(RejectedDetection { index, reason }),
            None => out.kept.push(index),
        }
    }
    out
}
