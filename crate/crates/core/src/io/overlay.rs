use super::document::{DetectionDocument, ImageSize};
use super::IoError;
use crate::geometry::VerticalModel;
use crate::solver::{SceneEstimate, SceneObservation};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OverlayOptions {
    /// Metric height of the reference object drawn next to every estimated object.
    pub reference_height_m: f64,
    pub show_detections: bool,
    pub show_reprojected: bool,
    pub show_references: bool,
}

impl Default for OverlayOptions {
    fn default() -> Self {
        Self {
            reference_height_m: 1.0,
            show_detections: true,
            show_reprojected: true,
            show_references: true,
        }
    }
}

/// Axis-aligned rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub width: f64,
    pub height: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayGeometry {
    pub width_px: f64,
    pub height_px: f64,
    pub horizon_y_px: f64,
    pub detections: Vec<Rect>,
    /// Detected bottoms with tops reprojected from the final estimate.
    pub reprojected: Vec<Rect>,
    /// Reference objects standing at the depth of each estimated object.
    pub references: Vec<Rect>,
}

/// Gap between an object box and its reference object, normalized.
const REFERENCE_GAP: f64 = 0.01;
/// Reference object width as a fraction of its height.
const REFERENCE_ASPECT: f64 = 0.3;

fn rect(u_left: f64, v_top: f64, u_right: f64, v_bottom: f64, scale: f64) -> Rect {
    Rect {
        x: u_left * scale,
        y: v_top * scale,
        width: (u_right - u_left) * scale,
        height: (v_bottom - v_top) * scale,
    }
}

/// Pixel geometry of the overlay. Reference objects that cannot be placed
/// (for example, a bottom on the horizon) are skipped.
pub fn overlay_geometry(
    image: ImageSize,
    observation: &SceneObservation,
    estimate: &SceneEstimate,
    options: &OverlayOptions,
) -> OverlayGeometry {
    let s = image.height_px;
    let cal = estimate.calibration;
    let final_layer = estimate.final_layer();
    let model = VerticalModel::from_horizon(cal.horizon_v0, cal.fov_rad, cal.principal_v).ok();

    let detections = observation
        .boxes
        .iter()
        .map(|b| rect(b.u_left, b.v_top, b.u_right, b.v_bottom, s))
        .collect();
    let mut reprojected = Vec::new();
    let mut references = Vec::new();
    for (k, &i) in estimate.object_indices.iter().enumerate() {
        let Some(b) = observation.boxes.get(i) else {
            continue;
        };
        if let Some(&top) = final_layer.reprojected_v_top.get(k) {
            reprojected.push(rect(b.u_left, top, b.u_right, b.v_bottom, s));
        }
        let top = model.and_then(|m| {
            m.top_from_bottom(estimate.cam_height_m, options.reference_height_m, b.v_bottom)
                .ok()
        });
        if let Some(t) = top {
            let height = b.v_bottom - t.v_top;
            let left = b.u_right + REFERENCE_GAP;
            references.push(rect(
                left,
                t.v_top,
                left + REFERENCE_ASPECT * height,
                b.v_bottom,
                s,
            ));
        }
    }
    OverlayGeometry {
        width_px: image.width_px,
        height_px: image.height_px,
        horizon_y_px: cal.horizon_v0 * s,
        detections,
        reprojected,
        references,
    }
}

fn push_rects(svg: &mut String, class: &str, stroke: &str, rects: &[Rect]) {
    let _ = writeln!(
        svg,
        r#"  <g class="{class}" fill="none" stroke="{stroke}" stroke-width="2">"#
    );
    for r in rects {
        let _ = writeln!(
            svg,
            r#"    <rect x="{:.4}" y="{:.4}" width="{:.4}" height="{:.4}"/>"#,
            r.x, r.y, r.width, r.height
        );
    }
    svg.push_str("  </g>\n");
}

/// SVG 1.1 rendering of [`OverlayGeometry`].
pub fn render_svg(geometry: &OverlayGeometry, options: &OverlayOptions) -> String {
    let (w, h) = (geometry.width_px, geometry.height_px);
    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(
        svg,
        r##"  <rect class="frame" x="0" y="0" width="{w}" height="{h}" fill="#f4f4f4" stroke="#000000"/>"##
    );
    let _ = writeln!(
        svg,
        r##"  <line class="horizon" x1="0" y1="{y:.4}" x2="{w}" y2="{y:.4}" stroke="#d62728" stroke-width="2"/>"##,
        y = geometry.horizon_y_px
    );
    if options.show_detections {
        push_rects(&mut svg, "detections", "#1f77b4", &geometry.detections);
    }
    if options.show_reprojected {
        push_rects(&mut svg, "reprojected", "#2ca02c", &geometry.reprojected);
    }
    if options.show_references {
        push_rects(&mut svg, "references", "#ff7f0e", &geometry.references);
    }
    svg.push_str("</svg>\n");
    svg
}

/// Overlay of a document's detections and the estimate computed from it.
pub fn emit_overlay(
    document: &DetectionDocument,
    estimate: &SceneEstimate,
    options: &OverlayOptions,
) -> Result<String, IoError> {
    let observation = document.observation()?;
    let geometry = overlay_geometry(document.image, &observation, estimate, options);
    Ok(render_svg(&geometry, options))
}
