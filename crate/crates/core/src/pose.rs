//! COCO-17 keypoints and the upright ratio of a person.
//!
//! The upright ratio compares the vertical extent a person occupies in the
//! image with the length of their articulated body chain. A standing person
//! has a ratio close to one; sitting or crouching lowers it.

use serde::{Deserialize, Serialize};

/// Keypoint slots in COCO order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(usize)]
pub enum CocoKeypoint {
    Nose = 0,
    LeftEye = 1,
    RightEye = 2,
    LeftEar = 3,
    RightEar = 4,
    LeftShoulder = 5,
    RightShoulder = 6,
    LeftElbow = 7,
    RightElbow = 8,
    LeftWrist = 9,
    RightWrist = 10,
    LeftHip = 11,
    RightHip = 12,
    LeftKnee = 13,
    RightKnee = 14,
    LeftAnkle = 15,
    RightAnkle = 16,
}

pub const NUM_KEYPOINTS: usize = 17;

pub const HEAD: [CocoKeypoint; 5] = [
    CocoKeypoint::Nose,
    CocoKeypoint::LeftEye,
    CocoKeypoint::RightEye,
    CocoKeypoint::LeftEar,
    CocoKeypoint::RightEar,
];

/// Ratios below this usually mean the person is not standing.
pub const NON_STANDING_THRESHOLD: f64 = 0.90;

/// Upper clamp on the ratio; noisy keypoints can overshoot 1 slightly.
pub const MAX_UPRIGHT_RATIO: f64 = 1.05;
const MIN_UPRIGHT_RATIO: f64 = 1e-3;

/// One keypoint in normalized image coordinates. `visibility` follows COCO:
/// 0 = absent, anything greater is treated as visible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, u8)", into = "(f64, f64, u8)")]
pub struct Keypoint {
    pub u: f64,
    pub v: f64,
    pub visibility: u8,
}

impl Keypoint {
    pub fn visible(u: f64, v: f64) -> Self {
        Self { u, v, visibility: 2 }
    }

    pub fn hidden() -> Self {
        Self {
            u: 0.0,
            v: 0.0,
            visibility: 0,
        }
    }

    pub fn is_visible(&self) -> bool {
        self.visibility > 0
    }
}

impl From<(f64, f64, u8)> for Keypoint {
    fn from((u, v, visibility): (f64, f64, u8)) -> Self {
        Self { u, v, visibility }
    }
}

impl From<Keypoint> for (f64, f64, u8) {
    fn from(k: Keypoint) -> Self {
        (k.u, k.v, k.visibility)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PoseError {
    #[error("expected {NUM_KEYPOINTS} keypoints, got {0}")]
    WrongCount(usize),
    #[error("keypoint coordinates must be finite")]
    NonFinite,
    #[error("missing keypoints: {}", .0.join(", "))]
    Missing(Vec<&'static str>),
    #[error("keypoint chain has zero length")]
    Degenerate,
    #[error("upright ratio must be positive, got {0}")]
    NonPositiveRatio(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Keypoint>", into = "Vec<Keypoint>")]
pub struct KeypointSet {
    points: [Keypoint; NUM_KEYPOINTS],
}

impl KeypointSet {
    pub fn new(points: [Keypoint; NUM_KEYPOINTS]) -> Result<Self, PoseError> {
        if points.iter().any(|k| !k.u.is_finite() || !k.v.is_finite()) {
            return Err(PoseError::NonFinite);
        }
        Ok(Self { points })
    }

    pub fn get(&self, which: CocoKeypoint) -> &Keypoint {
        &self.points[which as usize]
    }

    pub fn points(&self) -> &[Keypoint; NUM_KEYPOINTS] {
        &self.points
    }

    /// Applies `f` to every coordinate pair; visibility is kept.
    pub fn map_coords(&self, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut points = self.points;
        for k in points.iter_mut() {
            (k.u, k.v) = f(k.u, k.v);
        }
        Self { points }
    }

    fn visible(&self, which: CocoKeypoint) -> Option<(f64, f64)> {
        let k = self.get(which);
        k.is_visible().then_some((k.u, k.v))
    }

    pub fn head_visible(&self) -> bool {
        HEAD.iter().any(|&k| self.get(k).is_visible())
    }

    pub fn both_ankles_visible(&self) -> bool {
        self.get(CocoKeypoint::LeftAnkle).is_visible() && self.get(CocoKeypoint::RightAnkle).is_visible()
    }
}

impl TryFrom<Vec<Keypoint>> for KeypointSet {
    type Error = PoseError;

    fn try_from(v: Vec<Keypoint>) -> Result<Self, Self::Error> {
        let n = v.len();
        let points: [Keypoint; NUM_KEYPOINTS] = v.try_into().map_err(|_| PoseError::WrongCount(n))?;
        Self::new(points)
    }
}

impl From<KeypointSet> for Vec<Keypoint> {
    fn from(set: KeypointSet) -> Self {
        set.points.to_vec()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UprightConfig {
    /// Distance from the highest head keypoint to the top of the head, as a
    /// fraction of the body chain length.
    pub head_extension: f64,
}

impl Default for UprightConfig {
    fn default() -> Self {
        Self { head_extension: 0.08 }
    }
}

/// `l_actual / l_upright`, clamped to `(0, 1.05]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UprightRatio(f64);

impl UprightRatio {
    pub const UPRIGHT: UprightRatio = UprightRatio(1.0);

    pub fn new(ratio: f64) -> Result<Self, PoseError> {
        if !(ratio > 0.0 && ratio.is_finite()) {
            return Err(PoseError::NonPositiveRatio(ratio));
        }
        Ok(Self(ratio.min(MAX_UPRIGHT_RATIO)))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_standing(self) -> bool {
        self.0 >= NON_STANDING_THRESHOLD
    }
}

fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - b.0).hypot(a.1 - b.1)
}

fn midpoint(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    if pts.is_empty() {
        return None;
    }
    let n = pts.len() as f64;
    let (su, sv) = pts.iter().fold((0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1));
    Some((su / n, sv / n))
}

/// Upright ratio of one person.
///
/// `l_upright` is the longest chain head -> shoulder midpoint -> hip midpoint
/// -> knee -> ankle over the two legs, plus a head extension. `l_actual` is
/// the vertical distance from the head top (highest head keypoint raised by
/// the same extension) to the lowest visible ankle.
pub fn upright_ratio(kps: &KeypointSet, config: &UprightConfig) -> Result<UprightRatio, PoseError> {
    use CocoKeypoint::*;

    let head = HEAD
        .iter()
        .filter_map(|&k| kps.visible(k))
        .min_by(|a, b| a.1.total_cmp(&b.1));
    let shoulders: Vec<_> = [LeftShoulder, RightShoulder]
        .iter()
        .filter_map(|&k| kps.visible(k))
        .collect();
    let hips: Vec<_> = [LeftHip, RightHip]
        .iter()
        .filter_map(|&k| kps.visible(k))
        .collect();
    let legs: Vec<_> = [(LeftKnee, LeftAnkle), (RightKnee, RightAnkle)]
        .iter()
        .filter_map(|&(knee, ankle)| Some((kps.visible(knee)?, kps.visible(ankle)?)))
        .collect();

    let mut missing = Vec::new();
    if head.is_none() {
        missing.push("head (nose, eyes or ears)");
    }
    if shoulders.is_empty() {
        missing.push("shoulder");
    }
    if hips.is_empty() {
        missing.push("hip");
    }
    if legs.is_empty() {
        missing.push("knee and ankle on the same side");
    }
    let (Some(head), Some(shoulder), Some(hip), false) =
        (head, midpoint(&shoulders), midpoint(&hips), legs.is_empty())
    else {
        return Err(PoseError::Missing(missing));
    };

    let torso = dist(head, shoulder) + dist(shoulder, hip);
    let chain = legs
        .iter()
        .map(|&(knee, ankle)| torso + dist(hip, knee) + dist(knee, ankle))
        .fold(0.0, f64::max);
    if chain <= 0.0 {
        return Err(PoseError::Degenerate);
    }
    let lowest_ankle = [LeftAnkle, RightAnkle]
        .iter()
        .filter_map(|&k| kps.visible(k))
        .map(|p| p.1)
        .fold(f64::NEG_INFINITY, f64::max);

    let extension = config.head_extension * chain;
    let upright = chain + extension;
    let actual = lowest_ankle - head.1 + extension;
    UprightRatio::new((actual / upright).max(MIN_UPRIGHT_RATIO))
}

/// Upright (standing) height from a posed height.
pub fn actual_to_upright(h_actual: f64, ratio: UprightRatio) -> f64 {
    h_actual / ratio.value()
}

/// Posed height from an upright height.
pub fn upright_to_actual(h_upright: f64, ratio: UprightRatio) -> f64 {
    h_upright * ratio.value()
}
