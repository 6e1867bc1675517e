//! Threshold identification from expert scores, and rater agreement.
//!
//! An expert score only says how many errors of a type an image has, not
//! which stitches are at fault. Each image's score is turned into labels on
//! the attribute values most likely to satisfy the error condition, the
//! labels are pooled across images, and the ROC threshold maximizing the
//! Youden index `J = TPR - FPR` is chosen.
//!
//! Two-threshold errors use a grid search over the lower threshold. Worked
//! example for E4 at grid value `g = 0.05`, one image with `s_h = 2`,
//! expected 8 stitches, 7 detected, `l_wn = [0.04, 0.1, ...]`:
//! the deficit uses one unit of budget, the stitch with `l_wn = 0.04 < g`
//! uses the second and is a fixed true positive, and the residual budget of
//! zero labels the lowest aspect ratio False.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::ErrorCounts;
use crate::scene::SceneGeometry;
use crate::ErrorType;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("{0} cannot be calibrated with this procedure")]
    WrongProcedure(ErrorType),
    #[error("{0}: no attribute values to calibrate on")]
    EmptyPool(ErrorType),
    #[error("grid step must be positive and finite, got {0}")]
    GridStep(f64),
    #[error("score tables cover different images; only in test: {only_test:?}; only in reference: {only_reference:?}")]
    ImageMismatch {
        only_test: Vec<String>,
        only_reference: Vec<String>,
    },
}

/// Which side of a threshold is abnormal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Values above the threshold are flagged.
    Greater,
    /// Values below the threshold are flagged.
    Less,
}

impl Direction {
    pub fn flags(self, value: f64, threshold: f64) -> bool {
        match self {
            Direction::Greater => value > threshold,
            Direction::Less => value < threshold,
        }
    }

    /// Orders values from most to least abnormal.
    fn extremeness(self, a: f64, b: f64) -> std::cmp::Ordering {
        match self {
            Direction::Greater => b.total_cmp(&a),
            Direction::Less => a.total_cmp(&b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledInstance {
    pub value: f64,
    /// True marks an abnormal attribute.
    pub label: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Labeling {
    pub instances: Vec<LabeledInstance>,
    pub warnings: Vec<String>,
}

/// Labels the `s_h` most abnormal values True. With `s_h = 0` only the
/// single most abnormal value is labeled, as False. Ties keep input order.
pub fn label_instances(values: &[f64], s_h: u32, direction: Direction) -> Labeling {
    let mut sorted: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    sorted.sort_by(|a, b| direction.extremeness(*a, *b));
    let mut out = Labeling::default();
    if sorted.is_empty() {
        return out;
    }
    if s_h == 0 {
        out.instances.push(LabeledInstance {
            value: sorted[0],
            label: false,
        });
        return out;
    }
    let k = s_h as usize;
    if k > sorted.len() {
        out.warnings.push(format!(
            "score {s_h} exceeds the {} available values; all labeled True",
            sorted.len()
        ));
    }
    out.instances = sorted
        .into_iter()
        .take(k)
        .map(|value| LabeledInstance { value, label: true })
        .collect();
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    /// Instances flagged at this threshold, fixed positives included.
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub direction: Direction,
    /// Ascending thresholds, starting and ending with the infinite sentinels.
    pub points: Vec<RocPoint>,
    pub positives: usize,
    pub negatives: usize,
}

/// Instances counted as predicted positive at every threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FixedPositives {
    pub true_positives: usize,
    pub false_positives: usize,
}

/// ROC over midpoints between consecutive distinct values plus `±inf`.
/// A rate whose denominator is zero is reported as 0.
pub fn roc_curve(
    instances: &[LabeledInstance],
    direction: Direction,
    fixed: FixedPositives,
) -> RocCurve {
    let mut values: Vec<f64> = instances.iter().map(|i| i.value).collect();
    values.sort_by(f64::total_cmp);
    values.dedup();
    let mut thresholds = Vec::with_capacity(values.len() + 1);
    thresholds.push(f64::NEG_INFINITY);
    thresholds.extend(values.windows(2).map(|w| w[0] + (w[1] - w[0]) / 2.0));
    thresholds.push(f64::INFINITY);

    let pos = instances.iter().filter(|i| i.label).count() + fixed.true_positives;
    let neg = instances.iter().filter(|i| !i.label).count() + fixed.false_positives;
    let rate = |k: usize, d: usize| if d == 0 { 0.0 } else { k as f64 / d as f64 };
    let points = thresholds
        .into_iter()
        .map(|t| {
            let (mut tp, mut fp) = (fixed.true_positives, fixed.false_positives);
            for i in instances.iter().filter(|i| direction.flags(i.value, t)) {
                if i.label {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
            RocPoint {
                threshold: t,
                tpr: rate(tp, pos),
                fpr: rate(fp, neg),
                flagged: tp + fp,
            }
        })
        .collect();
    RocCurve {
        direction,
        points,
        positives: pos,
        negatives: neg,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YoudenResult {
    pub threshold: f64,
    pub j: f64,
    /// Set when the pool lacks one of the two classes.
    pub degenerate: bool,
    pub warnings: Vec<String>,
}

const J_EPS: f64 = 1e-12;

pub fn youden_threshold(instances: &[LabeledInstance], direction: Direction) -> YoudenResult {
    youden_with_fixed(instances, direction, FixedPositives::default())
}

/// Maximizes `J`; among ties the threshold flagging the fewest instances
/// wins. A single-class pool is degenerate: the result is the sentinel
/// flagging nothing (all False) or everything (all True).
pub fn youden_with_fixed(
    instances: &[LabeledInstance],
    direction: Direction,
    fixed: FixedPositives,
) -> YoudenResult {
    let roc = roc_curve(instances, direction, fixed);
    let mut warnings = Vec::new();
    let degenerate = roc.positives == 0 || roc.negatives == 0;
    if degenerate {
        warnings.push(format!(
            "single-class pool ({} True, {} False); threshold is a sentinel outside the data range",
            roc.positives, roc.negatives
        ));
    }
    let best = roc
        .points
        .iter()
        .copied()
        .reduce(|best, p| {
            let (jb, jp) = (best.tpr - best.fpr, p.tpr - p.fpr);
            if jp > jb + J_EPS || ((jp - jb).abs() <= J_EPS && p.flagged < best.flagged) {
                p
            } else {
                best
            }
        })
        .expect("sentinels are always present");
    let threshold = if roc.positives > 0 && roc.negatives == 0 {
        // Flag everything.
        match direction {
            Direction::Greater => f64::NEG_INFINITY,
            Direction::Less => f64::INFINITY,
        }
    } else {
        best.threshold
    };
    YoudenResult {
        threshold,
        j: if degenerate { 0.0 } else { best.tpr - best.fpr },
        degenerate,
        warnings,
    }
}

/// Attribute vectors of one image, as read from its scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageAttributes {
    pub image_id: String,
    pub beta: Vec<f64>,
    pub alpha: Vec<f64>,
    pub a: Vec<f64>,
    pub l_wn: Vec<f64>,
    pub l_d: Vec<f64>,
}

impl ImageAttributes {
    pub fn from_scene(image_id: impl Into<String>, scene: &SceneGeometry) -> Self {
        Self {
            image_id: image_id.into(),
            beta: scene.beta.clone(),
            alpha: scene.stitches.iter().map(|s| s.alpha).collect(),
            a: scene.stitches.iter().map(|s| s.a).collect(),
            l_wn: scene.stitches.iter().map(|s| s.l_wn).collect(),
            l_d: scene.l_d.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSample {
    pub attributes: ImageAttributes,
    pub scores: ErrorCounts,
}

/// Images with attributes and expert scores, kept sorted by image id so
/// results do not depend on input order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDataset {
    samples: Vec<CalibrationSample>,
    pub expected_stitches: usize,
}

impl CalibrationDataset {
    pub fn new(mut samples: Vec<CalibrationSample>, expected_stitches: usize) -> Self {
        samples.sort_by(|a, b| a.attributes.image_id.cmp(&b.attributes.image_id));
        Self {
            samples,
            expected_stitches,
        }
    }

    pub fn samples(&self) -> &[CalibrationSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Keeps only the listed images.
    pub fn restricted_to(&self, images: &BTreeSet<String>) -> Self {
        Self {
            samples: self
                .samples
                .iter()
                .filter(|s| images.contains(&s.attributes.image_id))
                .cloned()
                .collect(),
            expected_stitches: self.expected_stitches,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleCalibration {
    pub error: ErrorType,
    pub threshold: f64,
    pub j: f64,
    pub degenerate: bool,
    pub pool: Vec<LabeledInstance>,
    pub warnings: Vec<String>,
}

impl SingleCalibration {
    /// Pooled instances on the wrong side of the chosen threshold.
    pub fn misclassified(&self) -> usize {
        self.pool
            .iter()
            .filter(|i| Direction::Greater.flags(i.value, self.threshold) != i.label)
            .count()
    }
}

/// Calibrates `beta_star`, `alpha_star` or `l_w_plus` (all flag values
/// above the threshold).
pub fn calibrate_single(
    ds: &CalibrationDataset,
    error: ErrorType,
) -> Result<SingleCalibration, CalibrationError> {
    let pick: fn(&ImageAttributes) -> &[f64] = match error {
        ErrorType::E1 => |a| &a.beta,
        ErrorType::E2 => |a| &a.alpha,
        ErrorType::E3 => |a| &a.l_wn,
        _ => return Err(CalibrationError::WrongProcedure(error)),
    };
    let mut pool = Vec::new();
    let mut warnings = Vec::new();
    for s in &ds.samples {
        let values = pick(&s.attributes);
        let s_h = s.scores.get(error);
        if values.is_empty() {
            if s_h > 0 {
                warnings.push(format!(
                    "{}: score {s_h} but no {error} attributes; image skipped",
                    s.attributes.image_id
                ));
            }
            continue;
        }
        let mut l = label_instances(values, s_h, Direction::Greater);
        pool.append(&mut l.instances);
        warnings.extend(
            l.warnings
                .into_iter()
                .map(|w| format!("{}: {w}", s.attributes.image_id)),
        );
    }
    if pool.is_empty() {
        return Err(CalibrationError::EmptyPool(error));
    }
    let y = youden_threshold(&pool, Direction::Greater);
    warnings.extend(y.warnings.iter().map(|w| format!("{error}: {w}")));
    Ok(SingleCalibration {
        error,
        threshold: y.threshold,
        j: y.j,
        degenerate: y.degenerate,
        pool,
        warnings,
    })
}

pub const DEFAULT_GRID_STEP: f64 = 0.005;
/// Upper end of the lower-threshold grid: the nominal inter-stitch spacing
/// of an eight-stitch anastomosis.
pub const GRID_MAX: f64 = 0.125;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCalibration {
    pub error: ErrorType,
    /// Grid-searched lower threshold (`l_w_minus` or `l_d_minus`).
    pub lower: f64,
    /// ROC threshold on the residual pool (`a_star` or `l_d_plus`).
    pub roc_threshold: f64,
    pub j: f64,
    pub degenerate: bool,
    /// Residual pool at the chosen grid point.
    pub pool: Vec<LabeledInstance>,
    pub direction: Direction,
    /// Values below `lower`, each labeled by whether it consumed budget.
    pub fixed: Vec<LabeledInstance>,
    pub warnings: Vec<String>,
}

impl PairCalibration {
    /// Pooled instances on the wrong side of the chosen thresholds; fixed
    /// instances are predicted positive and wrong when labeled False.
    pub fn misclassified(&self) -> usize {
        let roc = self
            .pool
            .iter()
            .filter(|i| self.direction.flags(i.value, self.roc_threshold) != i.label)
            .count();
        roc + self.fixed.iter().filter(|i| !i.label).count()
    }
}

struct PairImage<'a> {
    id: &'a str,
    /// Values compared against the grid threshold.
    low: &'a [f64],
    /// Values ranked for the ROC threshold.
    roc: &'a [f64],
    /// The ROC pool excludes items already below the grid value.
    exclude_low: bool,
    budget: u32,
}

struct GridOutcome {
    fixed: Vec<LabeledInstance>,
    pool: Vec<LabeledInstance>,
    warnings: Vec<String>,
}

fn label_at_grid(images: &[PairImage], g: f64, direction: Direction) -> GridOutcome {
    let mut out = GridOutcome {
        fixed: Vec::new(),
        pool: Vec::new(),
        warnings: Vec::new(),
    };
    for img in images {
        let mut low: Vec<f64> = img.low.iter().copied().filter(|&v| v < g).collect();
        low.sort_by(f64::total_cmp);
        let used = (img.budget as usize).min(low.len());
        out.fixed
            .extend(low.iter().enumerate().map(|(k, &value)| LabeledInstance {
                value,
                label: k < used,
            }));
        let residual = img.budget - used as u32;
        let candidates: Vec<f64> = if img.exclude_low {
            img.roc.iter().copied().filter(|&v| v >= g).collect()
        } else {
            img.roc.to_vec()
        };
        let mut l = label_instances(&candidates, residual, direction);
        out.pool.append(&mut l.instances);
        out.warnings
            .extend(l.warnings.into_iter().map(|w| format!("{}: {w}", img.id)));
    }
    out
}

/// Calibrates `(l_w_minus, a_star)` for E4 or `(l_d_minus, l_d_plus)` for
/// E5 by grid search over the lower threshold. When several grid values
/// tie on `J`, the middle of the longest run of consecutive tied values is
/// used; a degenerate optimum takes the smallest grid value.
///
/// E4 budget order: missing stitches, then stitches with `l_wn` below the
/// grid value (smallest first), then the lowest aspect ratios over all
/// stitches. E5: gaps below the grid value, then the largest remaining
/// `l_d`.
pub fn calibrate_pair(
    ds: &CalibrationDataset,
    error: ErrorType,
    grid_step: f64,
) -> Result<PairCalibration, CalibrationError> {
    if !(grid_step > 0.0 && grid_step.is_finite()) {
        return Err(CalibrationError::GridStep(grid_step));
    }
    let (direction, exclude_low) = match error {
        ErrorType::E4 => (Direction::Less, false),
        ErrorType::E5 => (Direction::Greater, true),
        _ => return Err(CalibrationError::WrongProcedure(error)),
    };
    let mut warnings = Vec::new();
    let images: Vec<PairImage> = ds
        .samples
        .iter()
        .map(|s| {
            let at = &s.attributes;
            let s_h = s.scores.get(error);
            let (low, roc, budget): (&[f64], &[f64], u32) = match error {
                ErrorType::E4 => {
                    let deficit = ds.expected_stitches.saturating_sub(at.n()) as u32;
                    (&at.l_wn, &at.a, s_h.saturating_sub(deficit))
                }
                _ => (&at.l_d, &at.l_d, s_h),
            };
            PairImage {
                id: &at.image_id,
                low,
                roc,
                exclude_low,
                budget,
            }
        })
        .collect();

    let steps = (GRID_MAX / grid_step + 1e-9).floor() as usize;
    let evaluate = |k: usize| {
        let g = k as f64 * grid_step;
        let outcome = label_at_grid(&images, g, direction);
        if outcome.pool.is_empty() {
            return None;
        }
        let fixed = FixedPositives {
            true_positives: outcome.fixed.iter().filter(|i| i.label).count(),
            false_positives: outcome.fixed.iter().filter(|i| !i.label).count(),
        };
        let y = youden_with_fixed(&outcome.pool, direction, fixed);
        Some((g, y, outcome))
    };
    let js: Vec<Option<(f64, bool)>> = (0..=steps)
        .map(|k| evaluate(k).map(|(_, y, _)| (y.j, y.degenerate)))
        .collect();
    let best_j = js
        .iter()
        .flatten()
        .map(|&(j, _)| j)
        .fold(f64::NEG_INFINITY, f64::max);
    let chosen = js
        .iter()
        .position(|r| r.is_some_and(|(j, _)| j >= best_j - J_EPS))
        .map(|first| {
            if js[first].is_some_and(|(_, degenerate)| degenerate) {
                return first;
            }
            // Middle of the longest run of consecutive tied grid points.
            let tied = |k: usize| js[k].is_some_and(|(j, _)| j >= best_j - J_EPS);
            let (mut best_run, mut k) = ((first, 0), first);
            while k <= steps {
                if !tied(k) {
                    k += 1;
                    continue;
                }
                let start = k;
                while k <= steps && tied(k) {
                    k += 1;
                }
                if k - start > best_run.1 {
                    best_run = (start, k - start);
                }
            }
            best_run.0 + (best_run.1 - 1) / 2
        });
    let best = chosen.and_then(evaluate);
    let (lower, y, outcome) = best.ok_or(CalibrationError::EmptyPool(error))?;
    warnings.extend(outcome.warnings);
    warnings.extend(y.warnings.iter().map(|w| format!("{error}: {w}")));
    if lower == 0.0 {
        warnings.push(format!("{error}: lower threshold at the grid boundary 0"));
    }
    Ok(PairCalibration {
        error,
        lower,
        roc_threshold: y.threshold,
        j: y.j,
        degenerate: y.degenerate,
        pool: outcome.pool,
        direction,
        fixed: outcome.fixed,
        warnings,
    })
}

/// Agreement of one score table with a reference, per error type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub true_accuracy: f64,
    pub binary_accuracy: f64,
    /// Images with identical counts.
    pub agreeing: usize,
    /// Images with different counts.
    pub conflicting: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub images: usize,
    pub per_error: BTreeMap<ErrorType, Agreement>,
}

fn check_same_images(
    test: &BTreeMap<String, ErrorCounts>,
    reference: &BTreeMap<String, ErrorCounts>,
) -> Result<(), CalibrationError> {
    let only_test: Vec<String> = test
        .keys()
        .filter(|k| !reference.contains_key(*k))
        .cloned()
        .collect();
    let only_reference: Vec<String> = reference
        .keys()
        .filter(|k| !test.contains_key(*k))
        .cloned()
        .collect();
    if only_test.is_empty() && only_reference.is_empty() {
        Ok(())
    } else {
        Err(CalibrationError::ImageMismatch {
            only_test,
            only_reference,
        })
    }
}

/// A photo is a true positive when both counts are equal and nonzero, a
/// true negative when both are zero.
fn exact_hits(pairs: impl Iterator<Item = (u32, u32)>) -> (usize, usize) {
    let mut hits = 0;
    let mut total = 0;
    for (t, r) in pairs {
        total += 1;
        if t == r {
            hits += 1;
        }
    }
    (hits, total)
}

fn ratio(hits: usize, total: usize) -> f64 {
    if total == 0 {
        1.0
    } else {
        hits as f64 / total as f64
    }
}

/// Per-type counts as `(test, reference)` pairs in image order.
fn pairs<'a>(
    test: &'a BTreeMap<String, ErrorCounts>,
    reference: &'a BTreeMap<String, ErrorCounts>,
    error: ErrorType,
) -> impl Iterator<Item = (u32, u32)> + 'a {
    test.iter()
        .map(move |(k, t)| (t.get(error), reference[k].get(error)))
}

pub fn true_accuracy(
    test: &BTreeMap<String, ErrorCounts>,
    reference: &BTreeMap<String, ErrorCounts>,
    error: ErrorType,
) -> Result<f64, CalibrationError> {
    check_same_images(test, reference)?;
    let (hits, total) = exact_hits(pairs(test, reference, error));
    Ok(ratio(hits, total))
}

pub fn binary_accuracy(
    test: &BTreeMap<String, ErrorCounts>,
    reference: &BTreeMap<String, ErrorCounts>,
    error: ErrorType,
) -> Result<f64, CalibrationError> {
    check_same_images(test, reference)?;
    let (hits, total) =
        exact_hits(pairs(test, reference, error).map(|(t, r)| (t.min(1), r.min(1))));
    Ok(ratio(hits, total))
}

pub fn accuracy_report(
    test: &BTreeMap<String, ErrorCounts>,
    reference: &BTreeMap<String, ErrorCounts>,
) -> Result<AccuracyReport, CalibrationError> {
    check_same_images(test, reference)?;
    let per_error = ErrorType::ALL
        .iter()
        .map(|&e| {
            let (hits, total) = exact_hits(pairs(test, reference, e));
            let (bhits, _) =
                exact_hits(pairs(test, reference, e).map(|(t, r)| (t.min(1), r.min(1))));
            let agreement = Agreement {
                true_accuracy: ratio(hits, total),
                binary_accuracy: ratio(bhits, total),
                agreeing: hits,
                conflicting: total - hits,
            };
            (e, agreement)
        })
        .collect();
    Ok(AccuracyReport {
        images: test.len(),
        per_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanedImages {
    pub retained: BTreeSet<String>,
    pub removed: BTreeSet<String>,
    pub warnings: Vec<String>,
}

/// Drops images whose two scoring sessions disagree on `error`. Images
/// present in only one session are dropped too.
pub fn clean_dataset(
    t1: &BTreeMap<String, ErrorCounts>,
    t2: &BTreeMap<String, ErrorCounts>,
    error: ErrorType,
) -> CleanedImages {
    let mut retained = BTreeSet::new();
    let mut removed = BTreeSet::new();
    for id in t1.keys().chain(t2.keys()) {
        match (t1.get(id), t2.get(id)) {
            (Some(a), Some(b)) if a.get(error) == b.get(error) => {
                retained.insert(id.clone());
            }
            _ => {
                removed.insert(id.clone());
            }
        }
    }
    let mut warnings = Vec::new();
    if retained.is_empty() {
        warnings.push(format!(
            "{error}: every image has conflicting scores; nothing retained"
        ));
    }
    CleanedImages {
        retained,
        removed,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn li(value: f64, label: bool) -> LabeledInstance {
        LabeledInstance { value, label }
    }

    #[test]
    fn labeling_examples() {
        let v = [1.0, 5.0, 9.0];
        assert_eq!(
            label_instances(&v, 1, Direction::Greater).instances,
            vec![li(9.0, true)]
        );
        assert_eq!(
            label_instances(&v, 0, Direction::Greater).instances,
            vec![li(9.0, false)]
        );
        assert_eq!(
            label_instances(&v, 2, Direction::Less).instances,
            vec![li(1.0, true), li(5.0, true)]
        );
        let over = label_instances(&v, 5, Direction::Less);
        assert_eq!(over.instances.len(), 3);
        assert_eq!(over.warnings.len(), 1);
    }

    /// Enumerates every split of the sorted values directly.
    fn brute_force_j(pool: &[LabeledInstance], dir: Direction) -> f64 {
        let pos = pool.iter().filter(|i| i.label).count() as f64;
        let neg = pool.len() as f64 - pos;
        let mut vals: Vec<f64> = pool.iter().map(|i| i.value).collect();
        vals.push(f64::INFINITY);
        vals.push(f64::NEG_INFINITY);
        let mut best = f64::NEG_INFINITY;
        for &t in &vals {
            // Threshold just above or just below each value.
            for side in [-1e-9, 1e-9] {
                let t = t + side;
                let tp = pool
                    .iter()
                    .filter(|i| i.label && dir.flags(i.value, t))
                    .count() as f64;
                let fp = pool
                    .iter()
                    .filter(|i| !i.label && dir.flags(i.value, t))
                    .count() as f64;
                best = best.max(tp / pos - fp / neg);
            }
        }
        best
    }

    #[test]
    fn separable_pool() {
        let pool = [li(0.1, false), li(0.2, false), li(0.8, true), li(0.9, true)];
        let y = youden_threshold(&pool, Direction::Greater);
        assert_eq!(y.threshold, 0.5);
        assert_eq!(y.j, 1.0);
        assert!(!y.degenerate);
    }

    #[test]
    fn interleaved_pool() {
        let pool = [li(0.1, true), li(0.2, false), li(0.3, true), li(0.4, false)];
        let y = youden_threshold(&pool, Direction::Greater);
        assert!(y.j < 1.0);
        assert!((y.j - brute_force_j(&pool, Direction::Greater)).abs() < 1e-12);
        // J = 0 at -inf, 0.25 and +inf; +inf flags nothing.
        assert_eq!(y.threshold, f64::INFINITY);
        assert_eq!(y.j, 0.0);
        let y = youden_threshold(&pool, Direction::Less);
        assert!((y.threshold - 0.15).abs() < 1e-12 && y.j == 0.5);
    }

    #[test]
    fn degenerate_pools() {
        let all_true = [li(1.0, true), li(2.0, true)];
        let y = youden_threshold(&all_true, Direction::Greater);
        assert!(y.degenerate && y.threshold == f64::NEG_INFINITY && !y.warnings.is_empty());
        let all_false = [li(1.0, false), li(2.0, false)];
        let y = youden_threshold(&all_false, Direction::Greater);
        assert!(y.degenerate && y.threshold == f64::INFINITY);
        let y = youden_threshold(&all_false, Direction::Less);
        assert!(y.degenerate && y.threshold == f64::NEG_INFINITY);
    }

    #[test]
    fn roc_is_monotone_with_sentinels() {
        let pool = [li(3.0, true), li(1.0, false), li(2.0, true), li(2.0, false)];
        let roc = roc_curve(&pool, Direction::Greater, FixedPositives::default());
        let t: Vec<f64> = roc.points.iter().map(|p| p.threshold).collect();
        assert_eq!(t, vec![f64::NEG_INFINITY, 1.5, 2.5, f64::INFINITY]);
        assert_eq!((roc.points[0].tpr, roc.points[0].fpr), (1.0, 1.0));
        assert_eq!((roc.points[3].tpr, roc.points[3].fpr), (0.0, 0.0));
    }

    fn sample(
        id: &str,
        beta: Vec<f64>,
        n: usize,
        l_wn: Vec<f64>,
        a: Vec<f64>,
        l_d: Vec<f64>,
        s: [u32; 5],
    ) -> CalibrationSample {
        CalibrationSample {
            attributes: ImageAttributes {
                image_id: id.into(),
                beta,
                alpha: vec![0.0; n],
                a,
                l_wn,
                l_d,
            },
            scores: ErrorCounts(s),
        }
    }

    /// Two images worked by hand:
    /// image A, beta = [5, 40, 12], s1 = 1 -> (40, True);
    /// image B, beta = [8, 20], s1 = 0 -> (20, False).
    /// Pool {20 F, 40 T}: the midpoint 30 gives J = 1.
    #[test]
    fn two_image_hand_example() {
        let ds = CalibrationDataset::new(
            vec![
                sample(
                    "B",
                    vec![8.0, 20.0],
                    4,
                    vec![0.1; 4],
                    vec![3.0; 4],
                    vec![0.125; 3],
                    [0; 5],
                ),
                sample(
                    "A",
                    vec![5.0, 40.0, 12.0],
                    5,
                    vec![0.1; 5],
                    vec![3.0; 5],
                    vec![0.125; 4],
                    [1, 0, 0, 0, 0],
                ),
            ],
            8,
        );
        let c = calibrate_single(&ds, ErrorType::E1).unwrap();
        assert_eq!(c.pool, vec![li(40.0, true), li(20.0, false)]);
        assert_eq!(c.threshold, 30.0);
        assert_eq!(c.j, 1.0);
        assert_eq!(c.misclassified(), 0);
    }

    #[test]
    fn all_zero_scores_degenerate() {
        let ds = CalibrationDataset::new(
            vec![
                sample(
                    "a",
                    vec![1.0, 2.0],
                    4,
                    vec![0.1; 4],
                    vec![3.0; 4],
                    vec![0.125; 3],
                    [0; 5],
                ),
                sample(
                    "b",
                    vec![3.0],
                    3,
                    vec![0.1; 3],
                    vec![3.0; 3],
                    vec![0.125; 2],
                    [0; 5],
                ),
            ],
            8,
        );
        let c = calibrate_single(&ds, ErrorType::E1).unwrap();
        assert!(c.degenerate);
        assert!(!c.warnings.is_empty());
        assert_eq!(
            calibrate_single(&ds, ErrorType::E4),
            Err(CalibrationError::WrongProcedure(ErrorType::E4))
        );
    }

    #[test]
    fn pair_without_e4_scores_hits_boundary() {
        let ds = CalibrationDataset::new(
            (0..3)
                .map(|i| {
                    sample(
                        &format!("i{i}"),
                        vec![0.0; 6],
                        8,
                        vec![0.09, 0.1, 0.11, 0.1, 0.1, 0.1, 0.1, 0.1],
                        vec![3.0, 3.5, 3.2, 3.3, 3.4, 3.0, 3.1, 3.6],
                        vec![0.125; 7],
                        [0; 5],
                    )
                })
                .collect(),
            8,
        );
        let c = calibrate_pair(&ds, ErrorType::E4, DEFAULT_GRID_STEP).unwrap();
        assert_eq!(c.lower, 0.0);
        assert!(c.degenerate);
        assert!(c.warnings.iter().any(|w| w.contains("boundary")));
    }

    #[test]
    fn pair_recovers_planted_e5_band() {
        // Gaps outside [0.07, 0.148] were scored; the rest are nominal.
        let ds = CalibrationDataset::new(
            vec![
                sample(
                    "a",
                    vec![],
                    4,
                    vec![0.1; 4],
                    vec![3.0; 4],
                    vec![0.125, 0.04, 0.12],
                    [0, 0, 0, 0, 1],
                ),
                sample(
                    "b",
                    vec![],
                    4,
                    vec![0.1; 4],
                    vec![3.0; 4],
                    vec![0.13, 0.2, 0.12],
                    [0, 0, 0, 0, 1],
                ),
                sample(
                    "c",
                    vec![],
                    4,
                    vec![0.1; 4],
                    vec![3.0; 4],
                    vec![0.125, 0.131, 0.119],
                    [0; 5],
                ),
                sample(
                    "d",
                    vec![],
                    4,
                    vec![0.1; 4],
                    vec![3.0; 4],
                    vec![0.03, 0.25, 0.12],
                    [0, 0, 0, 0, 2],
                ),
            ],
            4,
        );
        let c = calibrate_pair(&ds, ErrorType::E5, DEFAULT_GRID_STEP).unwrap();
        assert_eq!(c.j, 1.0);
        assert_eq!(c.misclassified(), 0);
        assert!(c.lower > 0.04 && c.lower <= 0.12, "{}", c.lower);
        assert!(
            c.roc_threshold > 0.131 && c.roc_threshold < 0.2,
            "{}",
            c.roc_threshold
        );
    }

    #[test]
    fn pair_recovers_planted_e4() {
        // One missing stitch in "a"; a narrow bite in "b"; a blunt stitch in "c".
        let ds = CalibrationDataset::new(
            vec![
                sample(
                    "a",
                    vec![],
                    3,
                    vec![0.1, 0.11, 0.09],
                    vec![3.0, 3.2, 3.1],
                    vec![],
                    [0, 0, 0, 1, 0],
                ),
                sample(
                    "b",
                    vec![],
                    4,
                    vec![0.1, 0.03, 0.1, 0.1],
                    vec![3.0, 3.2, 3.1, 3.3],
                    vec![],
                    [0, 0, 0, 1, 0],
                ),
                sample(
                    "c",
                    vec![],
                    4,
                    vec![0.1, 0.1, 0.1, 0.1],
                    vec![3.0, 1.5, 3.1, 3.3],
                    vec![],
                    [0, 0, 0, 1, 0],
                ),
                sample(
                    "d",
                    vec![],
                    4,
                    vec![0.1, 0.1, 0.1, 0.1],
                    vec![3.0, 2.9, 3.1, 3.3],
                    vec![],
                    [0; 5],
                ),
            ],
            4,
        );
        let c = calibrate_pair(&ds, ErrorType::E4, DEFAULT_GRID_STEP).unwrap();
        assert_eq!(c.j, 1.0);
        assert_eq!(c.misclassified(), 0);
        assert!(c.lower > 0.03 && c.lower <= 0.09);
        assert!(c.roc_threshold > 1.5 && c.roc_threshold < 2.9);
    }

    #[test]
    fn single_grid_point_matches_residual_roc() {
        let ds = CalibrationDataset::new(
            vec![
                sample(
                    "a",
                    vec![],
                    4,
                    vec![0.1; 4],
                    vec![3.0, 1.0, 3.1, 3.3],
                    vec![0.12, 0.3, 0.11],
                    [0, 0, 0, 1, 1],
                ),
                sample(
                    "b",
                    vec![],
                    4,
                    vec![0.1; 4],
                    vec![3.0, 2.8, 3.1, 3.3],
                    vec![0.12, 0.13, 0.11],
                    [0; 5],
                ),
            ],
            4,
        );
        let c = calibrate_pair(&ds, ErrorType::E5, 1.0).unwrap();
        assert_eq!(c.lower, 0.0);
        let pool: Vec<_> = ds
            .samples()
            .iter()
            .flat_map(|s| {
                label_instances(
                    &s.attributes.l_d,
                    s.scores.get(ErrorType::E5),
                    Direction::Greater,
                )
                .instances
            })
            .collect();
        assert_eq!(
            c.roc_threshold,
            youden_threshold(&pool, Direction::Greater).threshold
        );
    }

    #[test]
    fn bad_grid_step() {
        let ds = CalibrationDataset::new(vec![], 8);
        assert_eq!(
            calibrate_pair(&ds, ErrorType::E4, 0.0),
            Err(CalibrationError::GridStep(0.0))
        );
        assert_eq!(
            calibrate_pair(&ds, ErrorType::E4, 0.01),
            Err(CalibrationError::EmptyPool(ErrorType::E4))
        );
    }

    fn table(rows: &[(&str, u32)], e: ErrorType) -> BTreeMap<String, ErrorCounts> {
        rows.iter()
            .map(|&(id, c)| {
                let mut counts = [0; 5];
                counts[e.index()] = c;
                (id.to_string(), ErrorCounts(counts))
            })
            .collect()
    }

    #[test]
    fn accuracy_worked_example() {
        let e = ErrorType::E2;
        let test = table(&[("1", 2), ("2", 0), ("3", 1)], e);
        let gt = table(&[("1", 2), ("2", 1), ("3", 1)], e);
        assert_eq!(true_accuracy(&test, &gt, e).unwrap(), 2.0 / 3.0);
        assert_eq!(binary_accuracy(&test, &gt, e).unwrap(), 2.0 / 3.0);
        assert_eq!(true_accuracy(&gt, &gt, e).unwrap(), 1.0);
        assert_eq!(binary_accuracy(&gt, &gt, e).unwrap(), 1.0);

        let one = table(&[("1", 1)], e);
        let two = table(&[("1", 2)], e);
        assert_eq!(true_accuracy(&one, &two, e).unwrap(), 0.0);
        assert_eq!(binary_accuracy(&one, &two, e).unwrap(), 1.0);

        let r = accuracy_report(&test, &gt).unwrap();
        assert_eq!(r.per_error[&e].conflicting, 1);
        assert_eq!(r.per_error[&ErrorType::E1].true_accuracy, 1.0);
    }

    #[test]
    fn accuracy_image_mismatch() {
        let e = ErrorType::E1;
        let err = true_accuracy(
            &table(&[("1", 0), ("2", 0)], e),
            &table(&[("1", 0), ("3", 0)], e),
            e,
        )
        .unwrap_err();
        assert_eq!(
            err,
            CalibrationError::ImageMismatch {
                only_test: vec!["2".into()],
                only_reference: vec!["3".into()],
            }
        );
    }

    #[test]
    fn cleaning() {
        let e = ErrorType::E3;
        let t1 = table(&[("1", 2), ("2", 0), ("3", 1)], e);
        let t2 = table(&[("1", 2), ("2", 1), ("3", 1)], e);
        let c = clean_dataset(&t1, &t2, e);
        assert_eq!(c.removed, BTreeSet::from(["2".to_string()]));
        assert_eq!(c.retained.len(), 2);
        assert!(clean_dataset(&t1, &t1, e).removed.is_empty());
        let t3 = table(&[("1", 0), ("2", 2), ("3", 0)], e);
        let c = clean_dataset(&t1, &t3, e);
        assert!(c.retained.is_empty() && c.warnings.len() == 1);
    }

    proptest! {
        #[test]
        fn binary_at_least_true(rows in prop::collection::vec((0u32..4, 0u32..4), 1..30)) {
            let e = ErrorType::E1;
            let test: BTreeMap<_, _> = rows.iter().enumerate().map(|(i, &(t, _))| (i.to_string(), ErrorCounts([t, 0, 0, 0, 0]))).collect();
            let gt: BTreeMap<_, _> = rows.iter().enumerate().map(|(i, &(_, g))| (i.to_string(), ErrorCounts([g, 0, 0, 0, 0]))).collect();
            prop_assert!(binary_accuracy(&test, &gt, e).unwrap() >= true_accuracy(&test, &gt, e).unwrap());
        }

        #[test]
        fn youden_matches_split_enumeration(
            pool in prop::collection::vec((0u32..20, any::<bool>()), 2..30),
            less in any::<bool>(),
        ) {
            let pool: Vec<_> = pool.into_iter().map(|(v, l)| li(v as f64 / 10.0, l)).collect();
            prop_assume!(pool.iter().any(|i| i.label) && pool.iter().any(|i| !i.label));
            let dir = if less { Direction::Less } else { Direction::Greater };
            let y = youden_threshold(&pool, dir);
            prop_assert!((y.j - brute_force_j(&pool, dir)).abs() < 1e-9);
        }

        #[test]
        fn separable_pools_split_in_the_gap(
            neg in prop::collection::vec(0.0f64..1.0, 1..15),
            pos in prop::collection::vec(1.5f64..3.0, 1..15),
        ) {
            let pool: Vec<_> = neg.iter().map(|&v| li(v, false)).chain(pos.iter().map(|&v| li(v, true))).collect();
            let y = youden_threshold(&pool, Direction::Greater);
            let max_neg = neg.iter().cloned().fold(f64::MIN, f64::max);
            let min_pos = pos.iter().cloned().fold(f64::MAX, f64::min);
            prop_assert_eq!(y.j, 1.0);
            prop_assert!(y.threshold > max_neg && y.threshold < min_pos);
        }

        #[test]
        fn calibration_ignores_image_order(
            betas in prop::collection::vec((prop::collection::vec(0.0f64..60.0, 1..6), 0u32..3), 2..8),
            seed in any::<u64>(),
        ) {
            let samples: Vec<_> = betas
                .iter()
                .enumerate()
                .map(|(i, (b, s))| {
                    let n = b.len() + 2;
                    sample(&format!("img{i}"), b.clone(), n, vec![0.1; n], vec![3.0; n], vec![0.125; n - 1], [*s, 0, 0, 0, *s])
                })
                .collect();
            let mut shuffled = samples.clone();
            let k = seed as usize % shuffled.len();
            shuffled.rotate_left(k);
            let last = shuffled.len() - 1;
            shuffled.swap(0, last);
            let a = CalibrationDataset::new(samples, 8);
            let b = CalibrationDataset::new(shuffled, 8);
            prop_assert_eq!(calibrate_single(&a, ErrorType::E1), calibrate_single(&b, ErrorType::E1));
            prop_assert_eq!(calibrate_pair(&a, ErrorType::E5, 0.01), calibrate_pair(&b, ErrorType::E5, 0.01));
        }
    }
}
