//! Documents, configuration, ingestion filters and overlays.

mod config;
mod document;
mod filter;
mod overlay;
mod results;

pub use config::{SynthConfig, ToolkitConfig};
pub use document::{
    Calibration, CoordinateUnits, DetectionDocument, ImageSize, VerticalAxis, SCHEMA_VERSION,
};
pub use filter::{filter_detections, FilterOutcome, FilterThresholds, RejectedDetection, RejectionReason};
pub use overlay::{emit_overlay, overlay_geometry, render_svg, OverlayGeometry, OverlayOptions, Rect};
pub use results::ResultsDocument;

use crate::baselines::{pgm_fixed_height, pgm_full};
use crate::geometry::GeometryError;
use crate::solver::{solve_scene, Method, SceneEstimate, SolveError};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed configuration: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("unit error: {0}")]
    Units(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Filters the document's detections and runs the configured method on the
/// kept boxes. Indices in the returned estimate refer to the document.
pub fn solve_document(
    document: &DetectionDocument,
    config: &ToolkitConfig,
) -> Result<ResultsDocument, crate::Error> {
    let observation = document.observation()?;
    let outcome = filter_detections(&observation, &config.filter);
    if outcome.kept.is_empty() && !observation.boxes.is_empty() {
        return Err(SolveError::AllDegenerate(outcome.rejected.len()).into());
    }
    let kept = outcome.apply(&observation);
    let mut estimate: SceneEstimate = match config.method {
        Method::ScaleNet => solve_scene(&kept, &config.priors, &config.refinement)?,
        Method::Pgm => pgm_full(
            &kept,
            &config.priors,
            &config.cam_height_prior,
            &config.refinement,
        )?,
        Method::PgmFixed => pgm_fixed_height(&kept, &config.priors, &config.refinement)?,
    };
    estimate.remap_indices(&outcome.kept);
    Ok(ResultsDocument {
        schema_version: SCHEMA_VERSION,
        method: config.method,
        config_hash: config.hash(),
        rejected: outcome.rejected,
        estimate,
    })
}
