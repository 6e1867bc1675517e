//! Detection quality: IoU matching and average precision for boxes and
//! masks.
//!
//! Boxes are the axis-aligned tight boxes of the polygons; masks are the
//! rasterized polygons. Average precision uses 101-point interpolation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::{AnnotationSet, BinaryMask, ClassLabel, Instance};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("prediction {index} of image `{image_id}` has no confidence")]
    MissingConfidence { image_id: String, index: usize },
    #[error("prediction and ground-truth sets cover different images; only predicted: {only_pred:?}; only ground truth: {only_gt:?}")]
    ImageMismatch {
        only_pred: Vec<String>,
        only_gt: Vec<String>,
    },
    #[error("image `{0}` appears more than once")]
    DuplicateImage(String),
    #[error("image `{0}` has different dimensions in predictions and ground truth")]
    SizeMismatch(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IouKind {
    Box,
    Mask,
}

/// Axis-aligned box `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBox {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl AxisBox {
    pub fn of(instance: &Instance) -> Self {
        let (x0, y0, x1, y1) = instance.bounds();
        Self { x0, y0, x1, y1 }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0).max(0.0) * (self.y1 - self.y0).max(0.0)
    }
}

/// Intersection over union; 0 when the union is empty.
pub fn box_iou(a: &AxisBox, b: &AxisBox) -> f64 {
    let inter = AxisBox {
        x0: a.x0.max(b.x0),
        y0: a.y0.max(b.y0),
        x1: a.x1.min(b.x1),
        y1: a.y1.min(b.y1),
    }
    .area();
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}

pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let inter = a.intersection_count(b);
    let union = a.count() + b.count() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// The standard threshold ladder 0.50, 0.55, ..., 0.95.
pub fn default_iou_thresholds() -> Vec<f64> {
    (0..10).map(|k| (50 + 5 * k) as f64 / 100.0).collect()
}

/// Outcome for one prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub prediction: usize,
    pub confidence: f64,
    pub ground_truth: Option<usize>,
    pub iou: f64,
}

/// Matches of one image and class at one threshold, ordered by descending
/// confidence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub matches: Vec<Match>,
    pub ground_truths: usize,
}

/// Greedy matching: predictions in descending confidence (ties by input
/// order) each take the unmatched ground truth of highest IoU at or above
/// `threshold`, ties by ground-truth order. `iou[p][g]` is the overlap of
/// prediction `p` and ground truth `g`.
pub fn match_predictions(
    confidences: &[f64],
    iou: &[Vec<f64>],
    ground_truths: usize,
    threshold: f64,
) -> MatchResult {
    let mut order: Vec<usize> = (0..confidences.len()).collect();
    order.sort_by(|&a, &b| confidences[b].total_cmp(&confidences[a]));
    let mut taken = vec![false; ground_truths];
    let matches = order
        .into_iter()
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for (g, &v) in iou[p].iter().enumerate() {
                if taken[g] || v < threshold {
                    continue;
                }
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            if let Some((g, _)) = best {
                taken[g] = true;
            }
            Match {
                prediction: p,
                confidence: confidences[p],
                ground_truth: best.map(|b| b.0),
                iou: best.map_or(0.0, |b| b.1),
            }
        })
        .collect();
    MatchResult {
        matches,
        ground_truths,
    }
}

/// 101-point interpolated AP over detections pooled across images. Each
/// item is `(confidence, is_true_positive)`; ties keep input order.
pub fn average_precision(detections: &[(f64, bool)], ground_truths: usize) -> f64 {
    if ground_truths == 0 {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..detections.len()).collect();
    order.sort_by(|&a, &b| detections[b].0.total_cmp(&detections[a].0));
    let mut tp = 0usize;
    let mut curve: Vec<(f64, f64)> = Vec::with_capacity(order.len());
    for (rank, &i) in order.iter().enumerate() {
        if detections[i].1 {
            tp += 1;
        }
        curve.push((
            tp as f64 / ground_truths as f64,
            tp as f64 / (rank + 1) as f64,
        ));
    }
    // Precision envelope: best precision at this recall or beyond.
    for k in (0..curve.len().saturating_sub(1)).rev() {
        curve[k].1 = curve[k].1.max(curve[k + 1].1);
    }
    let mut sum = 0.0;
    let mut k = 0;
    for step in 0..=100 {
        let r = step as f64 / 100.0;
        while k < curve.len() && curve[k].0 < r {
            k += 1;
        }
        if k < curve.len() {
            sum += curve[k].1;
        }
    }
    sum / 101.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindAp {
    /// AP at IoU 0.5.
    pub ap50: f64,
    /// Mean AP over `iou_thresholds`.
    pub ap: f64,
    pub per_threshold: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassAp {
    pub ground_truths: usize,
    pub predictions: usize,
    #[serde(rename = "box")]
    pub bbox: KindAp,
    pub mask: KindAp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct APReport {
    pub images: usize,
    pub iou_thresholds: Vec<f64>,
    /// `None` when the class has no ground truth.
    pub classes: BTreeMap<ClassLabel, Option<ClassAp>>,
    pub warnings: Vec<String>,
}

struct Overlaps {
    confidences: Vec<f64>,
    ground_truths: usize,
    iou: BTreeMap<IouKind, Vec<Vec<f64>>>,
}

fn overlaps(
    pred: &AnnotationSet,
    gt: &AnnotationSet,
    class: ClassLabel,
    warnings: &mut Vec<String>,
) -> Result<Overlaps, EvalError> {
    let preds: Vec<(usize, &Instance)> = pred.instances_of(class).collect();
    let gts: Vec<&Instance> = gt.instances_of(class).map(|(_, i)| i).collect();
    let confidences = preds
        .iter()
        .map(|(index, p)| {
            p.confidence.ok_or_else(|| EvalError::MissingConfidence {
                image_id: pred.image_id.clone(),
                index: *index,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let (w, h) = (gt.width, gt.height);
    let mut raster = |owner: &str, inst: &Instance| {
        let r = crate::interchange::rasterize(&inst.polygon, w, h);
        if let Some(msg) = r.warning {
            warnings.push(format!("{owner} {}: {msg}", gt.image_id));
        }
        r.mask
    };
    let pred_masks: Vec<BinaryMask> = preds
        .iter()
        .map(|(_, p)| raster("prediction in", p))
        .collect();
    let gt_masks: Vec<BinaryMask> = gts.iter().map(|g| raster("ground truth in", g)).collect();
    let pred_boxes: Vec<AxisBox> = preds.iter().map(|(_, p)| AxisBox::of(p)).collect();
    let gt_boxes: Vec<AxisBox> = gts.iter().map(|g| AxisBox::of(g)).collect();

    let box_iou_m = pred_boxes
        .iter()
        .map(|p| gt_boxes.iter().map(|g| box_iou(p, g)).collect())
        .collect();
    let mask_iou_m = pred_masks
        .iter()
        .map(|p| gt_masks.iter().map(|g| mask_iou(p, g)).collect())
        .collect();
    Ok(Overlaps {
        confidences,
        ground_truths: gts.len(),
        iou: BTreeMap::from([(IouKind::Box, box_iou_m), (IouKind::Mask, mask_iou_m)]),
    })
}

fn pooled_ap(per_image: &[Overlaps], kind: IouKind, threshold: f64) -> f64 {
    let mut detections = Vec::new();
    let mut gts = 0;
    for o in per_image {
        let m = match_predictions(&o.confidences, &o.iou[&kind], o.ground_truths, threshold);
        detections.extend(
            m.matches
                .iter()
                .map(|m| (m.confidence, m.ground_truth.is_some())),
        );
        gts += o.ground_truths;
    }
    average_precision(&detections, gts)
}

/// Pairs images by id and reports per-class box and mask AP.
pub fn evaluate(
    predictions: &[AnnotationSet],
    ground_truth: &[AnnotationSet],
    iou_thresholds: &[f64],
) -> Result<APReport, EvalError> {
    let index = |sets: &[AnnotationSet]| -> Result<BTreeMap<String, usize>, EvalError> {
        let mut m = BTreeMap::new();
        for (i, s) in sets.iter().enumerate() {
            if m.insert(s.image_id.clone(), i).is_some() {
                return Err(EvalError::DuplicateImage(s.image_id.clone()));
            }
        }
        Ok(m)
    };
    let pi = index(predictions)?;
    let gi = index(ground_truth)?;
    let only_pred: Vec<String> = pi
        .keys()
        .filter(|k| !gi.contains_key(*k))
        .cloned()
        .collect();
    let only_gt: Vec<String> = gi
        .keys()
        .filter(|k| !pi.contains_key(*k))
        .cloned()
        .collect();
    if !only_pred.is_empty() || !only_gt.is_empty() {
        return Err(EvalError::ImageMismatch { only_pred, only_gt });
    }

    let mut warnings = Vec::new();
    let mut classes = BTreeMap::new();
    for class in ClassLabel::ALL {
        let mut per_image = Vec::with_capacity(gi.len());
        for (id, &g) in &gi {
            let (p, g) = (&predictions[pi[id]], &ground_truth[g]);
            if (p.width, p.height) != (g.width, g.height) {
                return Err(EvalError::SizeMismatch(id.clone()));
            }
            per_image.push(overlaps(p, g, class, &mut warnings)?);
        }
        let gts: usize = per_image.iter().map(|o| o.ground_truths).sum();
        if gts == 0 {
            classes.insert(class, None);
            continue;
        }
        let kind_ap = |kind: IouKind| {
            let per_threshold: Vec<f64> = iou_thresholds
                .iter()
                .map(|&t| pooled_ap(&per_image, kind, t))
                .collect();
            let ap = if per_threshold.is_empty() {
                0.0
            } else {
                per_threshold.iter().sum::<f64>() / per_threshold.len() as f64
            };
            KindAp {
                ap50: pooled_ap(&per_image, kind, 0.5),
                ap,
                per_threshold,
            }
        };
        classes.insert(
            class,
            Some(ClassAp {
                ground_truths: gts,
                predictions: per_image.iter().map(|o| o.confidences.len()).sum(),
                bbox: kind_ap(IouKind::Box),
                mask: kind_ap(IouKind::Mask),
            }),
        );
    }
    Ok(APReport {
        images: gi.len(),
        iou_thresholds: iou_thresholds.to_vec(),
        classes,
        warnings,
    })
}
