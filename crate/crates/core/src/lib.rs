//! Quantitative assessment of microsurgical anastomoses from instance
//! annotations of stitches and vessels.
//!
//! The pipeline:
//!
//! 1. [`interchange`] reads annotation and expert-score files.
//! 2. [`geometry`] turns each instance mask into a minimum-area rotated box.
//! 3. [`scene`] assembles the anastomosis line, ordered stitches and their
//!    per-stitch and inter-stitch attributes.
//! 4. [`detect`] thresholds those attributes into counts for the five
//!    error types.
//! 5. [`calibration`] fits the thresholds to expert scores and measures
//!    rater agreement; [`eval`] scores detector output against ground truth.
//!
//! [`synth`] generates annotated scenes with known errors for testing.

pub mod calibration;
pub mod detect;
pub mod eval;
pub mod geometry;
pub mod interchange;
pub mod scene;
pub mod synth;

use serde::{Deserialize, Serialize};

pub use detect::{detect_all, load_thresholds, DetectionConfig, ErrorReport, Thresholds};
pub use interchange::{parse_annotation_file, parse_scores, AnnotationSet, Instance};
pub use scene::{build_scene, SceneGeometry};

/// The five error types scored from stitch geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorType {
    /// Disruption of the anastomosis line.
    E1,
    /// Oblique stitch.
    E2,
    /// Too wide a bite.
    E3,
    /// Partial thickness stitch.
    E4,
    /// Unequal distance between stitches.
    E5,
}

impl ErrorType {
    pub const ALL: [ErrorType; 5] = [
        ErrorType::E1,
        ErrorType::E2,
        ErrorType::E3,
        ErrorType::E4,
        ErrorType::E5,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::E1 => "E1",
            ErrorType::E2 => "E2",
            ErrorType::E3 => "E3",
            ErrorType::E4 => "E4",
            ErrorType::E5 => "E5",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ErrorType::E1 => "disruption of the anastomosis line",
            ErrorType::E2 => "oblique stitch",
            ErrorType::E3 => "too wide a bite",
            ErrorType::E4 => "partial thickness stitch",
            ErrorType::E5 => "unequal distance between stitches",
        }
    }
}

impl std::fmt::Display for ErrorType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}
