//! Per-image assessment documents and the batch summary.

use anastomosis_core::geometry::{Point, RotatedBox, UnitVec2, Vec2};
use anastomosis_core::{ErrorReport, SceneGeometry, Thresholds};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchReport {
    pub index: usize,
    /// Position of the instance in the annotation file.
    pub instance: Option<usize>,
    #[serde(rename = "box")]
    pub rect: RotatedBox,
    pub center: Point,
    pub orientation: UnitVec2,
    pub width: f64,
    pub height: f64,
    pub a: f64,
    pub alpha: f64,
    pub l_wn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub from: usize,
    pub to: usize,
    pub vector: Vec2,
    pub l_d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BendReport {
    /// The stitch at the vertex of the bend.
    pub stitch: usize,
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentReport {
    pub image_id: String,
    pub n: usize,
    pub expected_stitches: usize,
    pub line_direction: UnitVec2,
    pub vessel_box: RotatedBox,
    pub vessel_axis_length: f64,
    pub stitches: Vec<StitchReport>,
    pub gaps: Vec<GapReport>,
    pub bends: Vec<BendReport>,
    pub counts: [u32; 5],
    pub errors: ErrorReport,
    pub thresholds: Thresholds,
    pub warnings: Vec<String>,
}

impl AssessmentReport {
    pub fn new(
        image_id: &str,
        scene: &SceneGeometry,
        errors: ErrorReport,
        thresholds: Thresholds,
        expected_stitches: usize,
        warnings: Vec<String>,
    ) -> Self {
        let stitches = scene
            .stitches
            .iter()
            .map(|s| StitchReport {
                index: s.index,
                instance: s.instance,
                rect: s.rect,
                center: s.c_s,
                orientation: s.l_o_hat,
                width: s.width_len,
                height: s.height_len,
                a: s.a,
                alpha: s.alpha,
                l_wn: s.l_wn,
            })
            .collect();
        let gaps = scene
            .gap_vectors
            .iter()
            .zip(&scene.l_d)
            .enumerate()
            .map(|(i, (&vector, &l_d))| GapReport {
                from: i,
                to: i + 1,
                vector,
                l_d,
            })
            .collect();
        let bends = scene
            .beta
            .iter()
            .enumerate()
            .map(|(i, &beta)| BendReport {
                stitch: i + 1,
                beta,
            })
            .collect();
        Self {
            image_id: image_id.to_string(),
            n: scene.n(),
            expected_stitches,
            line_direction: scene.l_f_hat,
            vessel_box: scene.vessel_box,
            vessel_axis_length: scene.vessel_axis_len,
            stitches,
            gaps,
            bends,
            counts: errors.counts().0,
            errors,
            thresholds,
            warnings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageOutcome {
    pub input: String,
    pub image_id: Option<String>,
    pub status: ImageStatus,
    pub counts: Option<[u32; 5]>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessSummary {
    pub processed: usize,
    pub failed: usize,
    /// In input order.
    pub images: Vec<ImageOutcome>,
}
