//! Per-image geometry: anastomosis line, vessel axis, ordered stitches and
//! the attributes the error detector thresholds.
//!
//! Conventions:
//! - `l_f_hat` is the first principal component of the stitch centers,
//!   signed with `x >= 0`.
//! - A stitch's *height* edge is the box edge best aligned with `l_f_hat`
//!   (its direction is `l_o_hat`); the *width* edge is the other one and
//!   measures the bite across the line. Both are full side lengths.
//! - `l_d[i]` projects the whole gap vector on `l_f_hat` before normalizing
//!   by the vessel axis length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    acos_deg, angle_between_deg, min_area_rect, principal_direction, trace_contours, GeometryError,
    Point, RotatedBox, UnitVec2, Vec2,
};
use crate::interchange::{AnnotationSet, ClassLabel, Instance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SceneError {
    #[error("image `{0}` has no usable vessel instance")]
    NoVessel(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneOptions {
    /// Edges whose angles to the anastomosis line differ by less than this
    /// many degrees are treated as tied; the shorter edge then becomes the
    /// height edge. Zero means only exact ties.
    pub axis_tie_deg: f64,
}

impl Default for SceneOptions {
    fn default() -> Self {
        Self { axis_tie_deg: 1.0 }
    }
}

/// Result of splitting a box into its line-aligned and crossing edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAssignment {
    pub l_o_hat: UnitVec2,
    /// Full length of the edge crossing the line.
    pub width_len: f64,
    /// Full length of the line-aligned edge.
    pub height_len: f64,
    /// Angle between the best-aligned edge and the line, degrees in `[0, 45]`.
    pub alpha: f64,
    pub tie: bool,
}

/// Picks the box edge best aligned with `l_f_hat` using exact tie detection.
pub fn assign_axes(rect: &RotatedBox, l_f_hat: UnitVec2) -> AxisAssignment {
    assign_axes_with_tie(rect, l_f_hat, 0.0)
}

pub fn assign_axes_with_tie(rect: &RotatedBox, l_f_hat: UnitVec2, tie_deg: f64) -> AxisAssignment {
    let (w, h) = (rect.edge_w, rect.edge_h);
    let cos_w = (l_f_hat.dot(w) / w.norm()).abs();
    let cos_h = (l_f_hat.dot(h) / h.norm()).abs();
    let (ang_w, ang_h) = (acos_deg(cos_w), acos_deg(cos_h));
    let tie = (ang_w - ang_h).abs() <= tie_deg.max(1e-9 * 90.0);

    let aligned_is_w = if tie {
        // Shorter edge runs along the line; keeps the aspect ratio >= 1.
        w.norm() <= h.norm()
    } else {
        cos_w > cos_h
    };
    let (aligned, crossing) = if aligned_is_w { (w, h) } else { (h, w) };
    let mut l_o_hat = UnitVec2::new(aligned).expect("box edges are nonzero");
    if l_o_hat.dot(l_f_hat.vec()) < 0.0 {
        l_o_hat = l_o_hat.flipped();
    }
    AxisAssignment {
        l_o_hat,
        width_len: 2.0 * crossing.norm(),
        height_len: 2.0 * aligned.norm(),
        alpha: {
            let best = if cos_w >= cos_h { w } else { h };
            let a = angle_between_deg(best, l_f_hat.vec());
            a.min(180.0 - a)
        },
        tie,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StitchGeometry {
    /// Position along the anastomosis line, from 0.
    pub index: usize,
    /// Index of the source instance in the annotation set, when known.
    pub instance: Option<usize>,
    #[serde(rename = "box")]
    pub rect: RotatedBox,
    pub c_s: Point,
    pub l_o_hat: UnitVec2,
    pub width_len: f64,
    pub height_len: f64,
    /// Aspect ratio `width_len / height_len`.
    pub a: f64,
    /// Orientation deviation from the line, degrees.
    pub alpha: f64,
    /// `width_len / vessel_axis_len`.
    pub l_wn: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub l_f_hat: UnitVec2,
    pub vessel_box: RotatedBox,
    pub vessel_axis_len: f64,
    pub stitches: Vec<StitchGeometry>,
    /// `c_s[i+1] - c_s[i]`, length `n - 1`.
    pub gap_vectors: Vec<Vec2>,
    /// Turn angle between consecutive gap vectors, degrees, length `n - 2`.
    pub beta: Vec<f64>,
    /// Normalized inter-stitch distance, length `n - 1`.
    pub l_d: Vec<f64>,
    pub warnings: Vec<String>,
}

impl SceneGeometry {
    pub fn n(&self) -> usize {
        self.stitches.len()
    }

    /// Builds a scene directly from fitted boxes. `stitch_boxes` may be in
    /// any order; `instances` gives their source indices if known.
    pub fn from_boxes(
        vessel_box: RotatedBox,
        stitch_boxes: &[(Option<usize>, RotatedBox)],
        options: SceneOptions,
    ) -> SceneGeometry {
        let mut warnings = Vec::new();
        let centers: Vec<Point> = stitch_boxes.iter().map(|(_, b)| b.center).collect();

        let axis = if centers.len() >= 2 {
            principal_direction(&centers).ok()
        } else {
            None
        };
        let l_f_hat = match axis {
            Some(axis) => {
                if axis.is_isotropic() {
                    warnings.push(format!(
                        "stitch centers are nearly isotropic (eigenvalues {:.3}, {:.3}); line direction is unreliable",
                        axis.eigenvalues[0], axis.eigenvalues[1]
                    ));
                }
                axis.direction
            }
            None => {
                warnings.push(format!(
                    "{} stitch center(s); anastomosis line taken from the vessel's long axis",
                    centers.len()
                ));
                let long = if vessel_box.edge_w.norm() >= vessel_box.edge_h.norm() {
                    vessel_box.edge_w
                } else {
                    vessel_box.edge_h
                };
                let u = UnitVec2::new(long).expect("box edges are nonzero");
                if u.x() < 0.0 || (u.x() == 0.0 && u.y() < 0.0) {
                    u.flipped()
                } else {
                    u
                }
            }
        };

        let vessel_axis_len = vessel_axis_length(&vessel_box, l_f_hat);

        let mut stitches: Vec<StitchGeometry> = stitch_boxes
            .iter()
            .map(|&(instance, rect)| {
                let axes = assign_axes_with_tie(&rect, l_f_hat, options.axis_tie_deg);
                if axes.tie {
                    warnings.push(format!(
                        "stitch at ({:.1}, {:.1}): both edges equally aligned with the line; shorter edge used as height",
                        rect.center.x, rect.center.y
                    ));
                }
                StitchGeometry {
                    index: 0,
                    instance,
                    rect,
                    c_s: rect.center,
                    l_o_hat: axes.l_o_hat,
                    width_len: axes.width_len,
                    height_len: axes.height_len,
                    a: axes.width_len / axes.height_len,
                    alpha: axes.alpha,
                    l_wn: axes.width_len / vessel_axis_len,
                }
            })
            .collect();

        if stitches.len() < 2 {
            warnings.push(format!(
                "{} stitch(es) detected; inter-stitch attributes are empty",
                stitches.len()
            ));
        }
        let linked = order_and_link(std::mem::take(&mut stitches), l_f_hat, vessel_axis_len);

        SceneGeometry {
            l_f_hat,
            vessel_box,
            vessel_axis_len,
            stitches: linked.stitches,
            gap_vectors: linked.gap_vectors,
            beta: linked.beta,
            l_d: linked.l_d,
            warnings,
        }
    }
}

/// Full length of the vessel box edge best aligned with `l_f_hat`; on a tie
/// the longer edge.
pub fn vessel_axis_length(vessel_box: &RotatedBox, l_f_hat: UnitVec2) -> f64 {
    let (w, h) = (vessel_box.edge_w, vessel_box.edge_h);
    let cw = (l_f_hat.dot(w) / w.norm()).abs();
    let ch = (l_f_hat.dot(h) / h.norm()).abs();
    let aligned = if (cw - ch).abs() <= 1e-12 {
        w.norm().max(h.norm())
    } else if cw > ch {
        w.norm()
    } else {
        h.norm()
    };
    2.0 * aligned
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkedStitches {
    pub stitches: Vec<StitchGeometry>,
    pub gap_vectors: Vec<Vec2>,
    pub beta: Vec<f64>,
    pub l_d: Vec<f64>,
}

/// Sorts stitches by their center's projection on `l_f_hat` (ties by the
/// perpendicular coordinate), renumbers them, and derives the gap vectors,
/// turn angles and normalized distances.
pub fn order_and_link(
    mut stitches: Vec<StitchGeometry>,
    l_f_hat: UnitVec2,
    vessel_axis_len: f64,
) -> LinkedStitches {
    let along = l_f_hat.vec();
    let across = along.perp();
    stitches.sort_by(|p, q| {
        p.c_s
            .dot(along)
            .total_cmp(&q.c_s.dot(along))
            .then(p.c_s.dot(across).total_cmp(&q.c_s.dot(across)))
    });
    for (i, s) in stitches.iter_mut().enumerate() {
        s.index = i;
    }
    let gap_vectors: Vec<Vec2> = stitches.windows(2).map(|w| w[1].c_s - w[0].c_s).collect();
    let beta = gap_vectors
        .windows(2)
        .map(|g| angle_between_deg(g[0], g[1]))
        .collect();
    let l_d = gap_vectors
        .iter()
        .map(|g| g.dot(along) / vessel_axis_len)
        .collect();
    LinkedStitches {
        stitches,
        gap_vectors,
        beta,
        l_d,
    }
}

/// Rasterizes an instance, traces its outer borders and fits the
/// minimum-area rectangle to all border pixel centers.
pub fn fit_instance_box(
    instance: &Instance,
    width: u32,
    height: u32,
) -> Result<RotatedBox, GeometryError> {
    let mask = instance.rasterize(width, height);
    let points: Vec<Point> = trace_contours(&mask).into_iter().flatten().collect();
    min_area_rect(&points)
}

pub fn build_scene(annotations: &AnnotationSet) -> Result<SceneGeometry, SceneError> {
    build_scene_with(annotations, SceneOptions::default())
}

/// Fits every instance through the mask path and assembles the scene.
/// Unfittable instances are dropped with a warning; the largest vessel box
/// is used when several vessels are present.
pub fn build_scene_with(
    annotations: &AnnotationSet,
    options: SceneOptions,
) -> Result<SceneGeometry, SceneError> {
    let (w, h) = (annotations.width, annotations.height);
    let mut warnings = Vec::new();
    let mut fit = |index: usize, inst: &Instance| match fit_instance_box(inst, w, h) {
        Ok(b) => Some(b),
        Err(e) => {
            warnings.push(format!(
                "dropping {} instance {index}: {e}",
                inst.class_label.as_str()
            ));
            None
        }
    };

    let mut vessels: Vec<(usize, RotatedBox)> = Vec::new();
    let mut stitches: Vec<(Option<usize>, RotatedBox)> = Vec::new();
    for (index, inst) in annotations.instances.iter().enumerate() {
        if let Some(b) = fit(index, inst) {
            match inst.class_label {
                ClassLabel::Vessel => vessels.push((index, b)),
                ClassLabel::Stitch => stitches.push((Some(index), b)),
            }
        }
    }

    // First of the largest wins.
    let vessel = vessels
        .iter()
        .fold(None::<&(usize, RotatedBox)>, |best, v| match best {
            Some(b) if b.1.area() >= v.1.area() => Some(b),
            _ => Some(v),
        })
        .ok_or_else(|| SceneError::NoVessel(annotations.image_id.clone()))?;
    if vessels.len() > 1 {
        warnings.push(format!(
            "{} vessel instances; using instance {} (largest) and ignoring the rest",
            vessels.len(),
            vessel.0
        ));
    }

    let mut scene = SceneGeometry::from_boxes(vessel.1, &stitches, options);
    warnings.append(&mut scene.warnings);
    scene.warnings = warnings;
    Ok(scene)
}
