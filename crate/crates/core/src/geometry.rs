//! Ground-plane pinhole camera with zero roll and zero yaw.
//!
//! Conventions used throughout the crate:
//!
//! - World frame: `X` right, `Y` up, `Z` forward. The ground is `Y = 0`.
//! - Image rows grow downward (`v`-down). A positive pitch tilts the camera
//!   up, which pushes the horizon below the principal row:
//!   `v0 = v_c + f * tan(pitch)`.
//! - The extrinsic translation is `[0, h_cam, 0]` expressed in the camera
//!   frame. At zero pitch this places the optical center exactly `h_cam`
//!   above the ground; it is the model encoded by the closed-form projections
//!   below, and [`projection_oracle`] builds the same camera as a full
//!   `K [R | t]` matrix.
//! - Image coordinates crossing a public boundary are normalized by the image
//!   height (`v / h_im`, and `u / h_im` for the horizontal axis).
//!
//! With `s = sin(pitch)`, `c = cos(pitch)` and `v`-down pixels, an object of
//! height `h` standing at depth `z` projects to
//!
//! ```text
//! v_b = v_c + f * (h_cam + z s) / (z c)
//! v_t = v_c + f * (h_cam + z s - h c) / (h s + z c)
//! ```

use nalgebra::{Matrix3, Matrix3x4, Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Magnitude below which a projective denominator is treated as zero.
pub const SINGULAR_EPS: f64 = 1e-12;

/// Minimum separation (normalized units) between a bottom edge and the horizon.
pub const HORIZON_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("field of view {0} rad is outside (0, pi)")]
    FovOutOfRange(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("invalid object: {0}")]
    InvalidObject(String),
    #[error("singular configuration: the object top passes through the camera plane")]
    Singular,
    #[error("bottom edge v={v_bottom} coincides with the horizon v0={v0}")]
    HorizonDegenerate { v_bottom: f64, v0: f64 },
    #[error("bottom edge v={v_bottom} lies above the horizon v0={v0}")]
    AboveHorizon { v_bottom: f64, v0: f64 },
    #[error("point is behind the camera (camera-frame depth {0})")]
    BehindCamera(f64),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Focal length in pixels from the vertical field of view.
pub fn focal_from_fov(fov_rad: f64, image_h_px: f64) -> Result<f64> {
    if !(fov_rad > 0.0 && fov_rad < std::f64::consts::PI) {
        return Err(GeometryError::FovOutOfRange(fov_rad));
    }
    if !(image_h_px > 0.0 && image_h_px.is_finite()) {
        return Err(GeometryError::InvalidCamera(format!(
            "image height {image_h_px} must be positive"
        )));
    }
    Ok(0.5 * image_h_px / (0.5 * fov_rad).tan())
}

/// Vertical field of view from a focal length in pixels.
pub fn fov_from_focal(focal_px: f64, image_h_px: f64) -> Result<f64> {
    if !(focal_px > 0.0 && focal_px.is_finite()) {
        return Err(GeometryError::InvalidCamera(format!(
            "focal length {focal_px} must be positive"
        )));
    }
    if !(image_h_px > 0.0 && image_h_px.is_finite()) {
        return Err(GeometryError::InvalidCamera(format!(
            "image height {image_h_px} must be positive"
        )));
    }
    Ok(2.0 * (0.5 * image_h_px / focal_px).atan())
}

/// Full camera: intrinsics in pixels plus pitch and height above the ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub pitch_rad: f64,
    pub fov_rad: f64,
    pub focal_px: f64,
    pub cam_height_m: f64,
    pub image_w_px: f64,
    pub image_h_px: f64,
    pub principal_v_px: f64,
}

impl CameraParams {
    /// Camera with the principal point at the image center.
    pub fn new(
        pitch_rad: f64,
        fov_rad: f64,
        cam_height_m: f64,
        image_w_px: f64,
        image_h_px: f64,
    ) -> Result<Self> {
        let cam = Self {
            pitch_rad,
            fov_rad,
            focal_px: focal_from_fov(fov_rad, image_h_px)?,
            cam_height_m,
            image_w_px,
            image_h_px,
            principal_v_px: 0.5 * image_h_px,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn with_principal_v(mut self, principal_v_px: f64) -> Result<Self> {
        self.principal_v_px = principal_v_px;
        self.validate()?;
        Ok(self)
    }

    pub fn with_cam_height(mut self, cam_height_m: f64) -> Result<Self> {
        self.cam_height_m = cam_height_m;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(GeometryError::InvalidCamera(msg));
        if !(self.fov_rad > 0.0 && self.fov_rad < std::f64::consts::PI) {
            return Err(GeometryError::FovOutOfRange(self.fov_rad));
        }
        if !(self.image_h_px > 0.0 && self.image_h_px.is_finite()) {
            return bad(format!("image height {} must be positive", self.image_h_px));
        }
        if !(self.image_w_px > 0.0 && self.image_w_px.is_finite()) {
            return bad(format!("image width {} must be positive", self.image_w_px));
        }
        if !(self.focal_px > 0.0 && self.focal_px.is_finite()) {
            return bad(format!("focal length {} must be positive", self.focal_px));
        }
        if !(self.cam_height_m > 0.0 && self.cam_height_m.is_finite()) {
            return bad(format!("camera height {} must be positive", self.cam_height_m));
        }
        if !(self.pitch_rad.abs() < std::f64::consts::FRAC_PI_2) {
            return bad(format!("pitch {} must satisfy |pitch| < pi/2", self.pitch_rad));
        }
        if !self.principal_v_px.is_finite() {
            return bad("principal row must be finite".into());
        }
        let expected = 0.5 * self.image_h_px / (0.5 * self.fov_rad).tan();
        if ((self.focal_px - expected) / expected).abs() > 1e-9 {
            return bad(format!(
                "focal length {} inconsistent with field of view (expected {expected})",
                self.focal_px
            ));
        }
        Ok(())
    }

    pub fn principal_u_px(&self) -> f64 {
        0.5 * self.image_w_px
    }

    /// Vertical projection model in normalized image units.
    pub fn vertical_model(&self) -> VerticalModel {
        VerticalModel::from_pitch(
            self.pitch_rad,
            self.focal_px / self.image_h_px,
            self.principal_v_px / self.image_h_px,
        )
    }
}

/// A thin vertical object standing on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundObject {
    pub depth_m: f64,
    pub lateral_m: f64,
    pub height_m: f64,
    pub width_m: f64,
    pub category: crate::prior::Category,
}

impl GroundObject {
    pub fn validate(&self) -> Result<()> {
        if !(self.depth_m > 0.0 && self.depth_m.is_finite()) {
            return Err(GeometryError::InvalidObject(format!(
                "depth {} must be positive",
                self.depth_m
            )));
        }
        if !(self.height_m > 0.0 && self.height_m.is_finite()) {
            return Err(GeometryError::InvalidObject(format!(
                "height {} must be positive",
                self.height_m
            )));
        }
        Ok(())
    }
}

/// Top and bottom rows of an object, normalized by image height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageVerticalSpan {
    pub v_top: f64,
    pub v_bottom: f64,
}

/// Horizon row, normalized by image height. May lie outside `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonEstimate {
    pub v0: f64,
}

/// Projection of an object top given its detected bottom row, together with
/// its partial derivatives with respect to the camera and object heights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopProjection {
    pub v_top: f64,
    pub d_cam_height: f64,
    pub d_obj_height: f64,
}

/// Vertical slice of the camera model: everything needed to map heights and
/// depths to image rows, expressed in one consistent unit (normalized image
/// heights unless stated otherwise).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerticalModel {
    focal: f64,
    principal_v: f64,
    sin: f64,
    cos: f64,
}

impl VerticalModel {
    pub fn from_pitch(pitch_rad: f64, focal: f64, principal_v: f64) -> Self {
        let (sin, cos) = pitch_rad.sin_cos();
        Self {
            focal,
            principal_v,
            sin,
            cos,
        }
    }

    /// Model from a horizon row and vertical field of view, in normalized units.
    pub fn from_horizon(v0: f64, fov_rad: f64, principal_v: f64) -> Result<Self> {
        let focal = focal_from_fov(fov_rad, 1.0)?;
        if !v0.is_finite() || !principal_v.is_finite() {
            return Err(GeometryError::InvalidCamera(
                "horizon and principal row must be finite".into(),
            ));
        }
        Ok(Self::from_pitch(
            ((v0 - principal_v) / focal).atan(),
            focal,
            principal_v,
        ))
    }

    pub fn focal(&self) -> f64 {
        self.focal
    }

    pub fn principal_v(&self) -> f64 {
        self.principal_v
    }

    pub fn pitch_rad(&self) -> f64 {
        self.sin.atan2(self.cos)
    }

    pub fn horizon(&self) -> f64 {
        self.principal_v + self.focal * self.sin / self.cos
    }

    /// Row of a point `height_m` above the ground at depth `depth_m`.
    pub fn project(&self, cam_height_m: f64, height_m: f64, depth_m: f64) -> Result<f64> {
        // camera-frame depth of the point
        let den = height_m * self.sin + depth_m * self.cos;
        if den.abs() < SINGULAR_EPS {
            return Err(GeometryError::Singular);
        }
        if den < 0.0 {
            return Err(GeometryError::BehindCamera(den));
        }
        let num = cam_height_m + depth_m * self.sin - height_m * self.cos;
        Ok(self.principal_v + self.focal * num / den)
    }

    pub fn depth_from_bottom(&self, cam_height_m: f64, v_bottom: f64) -> Result<f64> {
        let gap = self.bottom_gap(v_bottom)?;
        Ok(self.focal * cam_height_m / (gap * self.cos))
    }

    /// Top row of an object whose bottom is pinned at `v_bottom`.
    pub fn top_from_bottom(
        &self,
        cam_height_m: f64,
        obj_height_m: f64,
        v_bottom: f64,
    ) -> Result<TopProjection> {
        let gap = self.bottom_gap(v_bottom)?;
        // depth = cam_height * depth_per_cam
        let depth_per_cam = self.focal / (gap * self.cos);
        let num_cam = 1.0 + depth_per_cam * self.sin;
        let den_cam = depth_per_cam * self.cos;
        let num = cam_height_m * num_cam - obj_height_m * self.cos;
        let den = obj_height_m * self.sin + cam_height_m * den_cam;
        if den.abs() < SINGULAR_EPS {
            return Err(GeometryError::Singular);
        }
        let den2 = den * den;
        Ok(TopProjection {
            v_top: self.principal_v + self.focal * num / den,
            d_cam_height: self.focal * (num_cam * den - num * den_cam) / den2,
            d_obj_height: self.focal * (-self.cos * den - num * self.sin) / den2,
        })
    }

    /// Exact object height from a vertical span.
    pub fn height_from_span(&self, cam_height_m: f64, span: ImageVerticalSpan) -> Result<f64> {
        let depth = self.depth_from_bottom(cam_height_m, span.v_bottom)?;
        let k = (span.v_top - self.principal_v) / self.focal;
        let den = self.cos + k * self.sin;
        if den.abs() < SINGULAR_EPS {
            return Err(GeometryError::Singular);
        }
        Ok((cam_height_m + depth * self.sin - k * depth * self.cos) / den)
    }

    fn bottom_gap(&self, v_bottom: f64) -> Result<f64> {
        let v0 = self.horizon();
        let gap = v_bottom - v0;
        if gap.abs() <= HORIZON_EPS {
            return Err(GeometryError::HorizonDegenerate { v_bottom, v0 });
        }
        if gap < 0.0 {
            return Err(GeometryError::AboveHorizon { v_bottom, v0 });
        }
        Ok(gap)
    }
}

/// Horizon row implied by the camera pitch.
pub fn horizon_from_pitch(camera: &CameraParams) -> HorizonEstimate {
    HorizonEstimate {
        v0: camera.vertical_model().horizon(),
    }
}

/// Pitch recovered from a horizon row; only the intrinsics of `camera` are used.
pub fn pitch_from_horizon(camera: &CameraParams, horizon: HorizonEstimate) -> f64 {
    let v0_px = horizon.v0 * camera.image_h_px;
    ((v0_px - camera.principal_v_px) / camera.focal_px).atan()
}

pub fn project_vertical(camera: &CameraParams, object: &GroundObject) -> Result<ImageVerticalSpan> {
    if !(object.depth_m > 0.0) {
        return Err(GeometryError::InvalidObject(format!(
            "depth {} must be positive",
            object.depth_m
        )));
    }
    if !(object.height_m >= 0.0) {
        return Err(GeometryError::InvalidObject(format!(
            "height {} must be non-negative",
            object.height_m
        )));
    }
    let model = camera.vertical_model();
    Ok(ImageVerticalSpan {
        v_top: model.project(camera.cam_height_m, object.height_m, object.depth_m)?,
        v_bottom: model.project(camera.cam_height_m, 0.0, object.depth_m)?,
    })
}

/// Ground depth of a point whose image row is `v_bottom` (normalized).
pub fn depth_from_bottom(camera: &CameraParams, v_bottom: f64) -> Result<f64> {
    camera
        .vertical_model()
        .depth_from_bottom(camera.cam_height_m, v_bottom)
}

pub fn height_from_box_exact(camera: &CameraParams, span: ImageVerticalSpan) -> Result<f64> {
    camera
        .vertical_model()
        .height_from_span(camera.cam_height_m, span)
}

/// Object height under the zero-pitch, far-field linearization
/// `h_obj = h_cam (v_t - v_b) / (v0 - v_b)`.
pub fn height_from_box_hoiem(
    cam_height_m: f64,
    horizon: HorizonEstimate,
    span: ImageVerticalSpan,
) -> Result<f64> {
    let den = horizon.v0 - span.v_bottom;
    if den.abs() <= HORIZON_EPS {
        return Err(GeometryError::HorizonDegenerate {
            v_bottom: span.v_bottom,
            v0: horizon.v0,
        });
    }
    Ok(cam_height_m * (span.v_top - span.v_bottom) / den)
}

/// The camera as a 3x4 projection matrix `K [R | t]` in pixels.
pub fn projection_matrix(camera: &CameraParams) -> Matrix3x4<f64> {
    let f = camera.focal_px;
    let k = Matrix3::new(
        f,
        0.0,
        camera.principal_u_px(),
        0.0,
        f,
        camera.principal_v_px,
        0.0,
        0.0,
        1.0,
    );
    let (s, c) = camera.pitch_rad.sin_cos();
    // world (X right, Y up, Z forward) -> camera (x right, y down, z forward)
    let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, -c, s, 0.0, s, c);
    let t = Vector3::new(0.0, camera.cam_height_m, 0.0);
    let mut rt = Matrix3x4::zeros();
    rt.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
    rt.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
    k * rt
}

/// Pixel coordinates `(u, v)` of a world point via the full projection matrix.
pub fn projection_oracle(camera: &CameraParams, point: Point3<f64>) -> Result<(f64, f64)> {
    let p = projection_matrix(camera) * point.to_homogeneous();
    if p.z <= SINGULAR_EPS {
        return Err(GeometryError::BehindCamera(p.z));
    }
    Ok((p.x / p.z, p.y / p.z))
}
