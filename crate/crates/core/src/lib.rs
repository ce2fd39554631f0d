//! Recovering camera height and metric object heights from a single image's
//! detections, a horizon estimate and a field of view.
//!
//! Image coordinates are normalized by the image height and grow downward.
//!
//! ```
//! use metrology_core::prior::PriorTable;
//! use metrology_core::solver::solve_scene;
//! use metrology_core::synth::{generate, NoiseModel, SceneRanges};
//!
//! let (scene, observation) = generate(&SceneRanges::default(), &NoiseModel::boxes(0.001), 20, 7).unwrap();
//! let estimate = solve_scene(&observation, &PriorTable::default(), &Default::default()).unwrap();
//! let truth = scene.truth().cam_height_m;
//! assert!((estimate.cam_height_m - truth).abs() < 0.25 * truth);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
mod error;
pub mod eval;
pub mod geometry;
pub mod io;
pub mod pose;
pub mod prior;
pub mod solver;
pub mod stats;
pub mod synth;

pub use error::Error;
