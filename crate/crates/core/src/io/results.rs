use super::document::SCHEMA_VERSION;
use super::filter::RejectedDetection;
use super::IoError;
use crate::eval::{metrics_for_inputs, EvalError, HeightComparison, SceneMetrics};
use crate::solver::{Method, SceneEstimate};
use crate::synth::GroundTruth;
use serde::{Deserialize, Serialize};

/// Output of one solve: the estimate plus what produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultsDocument {
    pub schema_version: u32,
    pub method: Method,
    /// Hash of the configuration the estimate was computed with.
    pub config_hash: String,
    /// Boxes dropped by the ingestion filters, by input index.
    pub rejected: Vec<RejectedDetection>,
    pub estimate: SceneEstimate,
}

impl ResultsDocument {
    /// Number of boxes in the source document.
    pub fn num_inputs(&self) -> usize {
        self.estimate.num_inputs() + self.rejected.len()
    }

    pub fn metrics(
        &self,
        truth: &GroundTruth,
        comparison: HeightComparison,
    ) -> Result<SceneMetrics, EvalError> {
        metrics_for_inputs(&self.estimate, self.num_inputs(), truth, comparison)
    }

    pub fn emit(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("results serialize");
        s.push('\n');
        s
    }

    pub fn parse(bytes: &[u8]) -> Result<Self, IoError> {
        let doc: Self = serde_json::from_slice(bytes)?;
        if doc.schema_version != SCHEMA_VERSION {
            return Err(IoError::SchemaVersion {
                found: doc.schema_version,
                expected: SCHEMA_VERSION,
            });
        }
        if doc.method != doc.estimate.method {
            return Err(IoError::Schema(format!(
                "method `{}` disagrees with estimate method `{}`",
                doc.method, doc.estimate.method
            )));
        }
        Ok(doc)
    }
}
