//! Seeded generator of unrolled anastomosis scenes with planted errors.
//!
//! A scene is laid out in a local frame with `u` along the anastomosis line
//! and `v` across it, then rotated by `rotation_deg` and translated into the
//! image. Nominal stitches are `3 * needle_diameter` wide across the line,
//! `width / nominal_aspect` along it, perpendicular to the line, and spaced
//! `vessel_length / stitch_count` apart. Every slot draws the same jitter
//! regardless of injections, so an injection changes only its target.
//!
//! The ground truth is the detector run on the generating rectangles. A
//! scene is rejected unless every injected attribute is past its threshold
//! by `margin_factor` and every other attribute is inside its threshold by
//! `benign_clearance`; knock-on effects (the merged gap left by a dropped
//! stitch) need only the clearance.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detect::{detect_all, DetectionConfig, ErrorReport, Thresholds};
use crate::geometry::{angle_between_deg, Point, RotatedBox, Vec2};
use crate::interchange::{
    AnnotationSet, ClassLabel, ErrorCounts, Instance, RaterScoreTable, ScoreKey,
};
use crate::scene::{SceneGeometry, SceneOptions};
use crate::ErrorType;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),
    #[error("scene cannot be resolved: {0}")]
    Unresolvable(String),
    #[error("no valid scene after {0} attempts")]
    Exhausted(usize),
}

/// Uniform benign noise amplitudes (each drawn from `[-amp, amp]`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Jitter {
    /// Center offset along the line, px.
    pub along: f64,
    /// Center offset across the line, px.
    pub across: f64,
    /// Stitch tilt, degrees.
    pub angle_deg: f64,
    /// Relative bite width change.
    pub width_rel: f64,
}

impl Jitter {
    pub const NONE: Jitter = Jitter {
        along: 0.0,
        across: 0.0,
        angle_deg: 0.0,
        width_rel: 0.0,
    };
}

impl Default for Jitter {
    fn default() -> Self {
        Self {
            along: 5.0,
            across: 3.0,
            angle_deg: 2.0,
            width_rel: 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum E4Mode {
    /// Shortens the bite along the line; `aspect` is the resulting `a`.
    LowAspect { aspect: f64 },
    /// Narrows the bite across the line to `width_ratio * vessel_length`,
    /// keeping its length, so both the width and aspect terms fire.
    NarrowBite { width_ratio: f64 },
    /// Removes the stitch.
    Drop,
}

/// One planted error. Targets are slot indices `0..stitch_count` in line
/// order; an E5 target is the gap after that slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "error", deny_unknown_fields)]
pub enum Injection {
    /// Moves the stitch off the line so the bend at it is `bend_deg`.
    E1 {
        target: usize,
        bend_deg: f64,
    },
    /// Tilts the stitch by `angle_deg` from perpendicular.
    E2 {
        target: usize,
        angle_deg: f64,
    },
    /// Widens the bite to `width_ratio * vessel_length`.
    E3 {
        target: usize,
        width_ratio: f64,
    },
    E4 {
        target: usize,
        mode: E4Mode,
    },
    /// Sets the gap after `target` to `distance_ratio * vessel_length`.
    E5 {
        target: usize,
        distance_ratio: f64,
    },
}

impl Injection {
    pub fn error(&self) -> ErrorType {
        match self {
            Injection::E1 { .. } => ErrorType::E1,
            Injection::E2 { .. } => ErrorType::E2,
            Injection::E3 { .. } => ErrorType::E3,
            Injection::E4 { .. } => ErrorType::E4,
            Injection::E5 { .. } => ErrorType::E5,
        }
    }

    pub fn target(&self) -> usize {
        match *self {
            Injection::E1 { target, .. }
            | Injection::E2 { target, .. }
            | Injection::E3 { target, .. }
            | Injection::E4 { target, .. }
            | Injection::E5 { target, .. } => target,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub image_id: String,
    /// Expected stitch count `N`.
    pub stitch_count: usize,
    pub needle_diameter: f64,
    /// Nominal `a` of an unperturbed stitch.
    pub nominal_aspect: f64,
    pub vessel_length: f64,
    pub vessel_height: f64,
    /// Direction of the anastomosis line in the image, degrees.
    pub rotation_deg: f64,
    pub jitter: Jitter,
    pub margin_factor: f64,
    pub benign_clearance: f64,
    pub thresholds: Thresholds,
    pub injections: Vec<Injection>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            image_id: "synth".into(),
            stitch_count: 8,
            needle_diameter: 150.0,
            nominal_aspect: 3.6,
            vessel_length: 4500.0,
            vessel_height: 675.0,
            rotation_deg: 0.0,
            jitter: Jitter::default(),
            margin_factor: 1.5,
            benign_clearance: 1.1,
            thresholds: Thresholds::default(),
            injections: Vec::new(),
        }
    }
}

impl SceneSpec {
    pub fn nominal_width(&self) -> f64 {
        3.0 * self.needle_diameter
    }

    pub fn spacing(&self) -> f64 {
        self.vessel_length / self.stitch_count as f64
    }

    fn dropped(&self) -> BTreeSet<usize> {
        self.injections
            .iter()
            .filter_map(|i| match *i {
                Injection::E4 {
                    target,
                    mode: E4Mode::Drop,
                } => Some(target),
                _ => None,
            })
            .collect()
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        let n = self.stitch_count;
        if n < 2 {
            return bad(format!("stitch_count must be at least 2, got {n}"));
        }
        for (name, v) in [
            ("needle_diameter", self.needle_diameter),
            ("nominal_aspect", self.nominal_aspect),
            ("vessel_length", self.vessel_length),
            ("vessel_height", self.vessel_height),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("`{name}` must be positive, got {v}"));
            }
        }
        let j = self.jitter;
        if ![j.along, j.across, j.angle_deg, j.width_rel]
            .iter()
            .all(|v| *v >= 0.0 && v.is_finite())
            || j.width_rel >= 1.0
        {
            return bad("jitter amplitudes must be non-negative (width_rel below 1)".into());
        }
        if !self.rotation_deg.is_finite() {
            return bad("rotation_deg must be finite".into());
        }
        if !(self.margin_factor >= 1.0 && self.benign_clearance >= 1.0) {
            return bad("margin_factor and benign_clearance must be at least 1".into());
        }
        self.thresholds
            .validate()
            .map_err(|e| SynthError::InvalidSpec(e.to_string()))?;

        let dropped = self.dropped();
        if n - dropped.len() < 2 {
            return bad("fewer than two stitches would remain".into());
        }
        let mut seen = BTreeSet::new();
        let mut widths = BTreeSet::new();
        for inj in &self.injections {
            let t = inj.target();
            let limit = if inj.error() == ErrorType::E5 {
                n - 1
            } else {
                n
            };
            if t >= limit {
                return bad(format!(
                    "{} target {t} out of range 0..{limit}",
                    inj.error()
                ));
            }
            if !seen.insert((inj.error(), t)) {
                return bad(format!("two {} injections at {t}", inj.error()));
            }
            let positive = |v: f64| v > 0.0 && v.is_finite();
            let ok = match *inj {
                Injection::E1 { bend_deg, .. } => positive(bend_deg) && bend_deg < 180.0,
                Injection::E2 { angle_deg, .. } => positive(angle_deg) && angle_deg <= 45.0,
                Injection::E3 { width_ratio, .. } => positive(width_ratio),
                Injection::E4 { mode, .. } => match mode {
                    E4Mode::LowAspect { aspect } => positive(aspect),
                    E4Mode::NarrowBite { width_ratio } => positive(width_ratio),
                    E4Mode::Drop => true,
                },
                Injection::E5 { distance_ratio, .. } => positive(distance_ratio),
            };
            if !ok {
                return bad(format!("{} magnitude at {t} out of range", inj.error()));
            }
            match *inj {
                Injection::E5 { target, .. } => {
                    if dropped.contains(&target) || dropped.contains(&(target + 1)) {
                        return bad(format!("E5 gap {target} borders a dropped stitch"));
                    }
                }
                Injection::E4 {
                    mode: E4Mode::Drop, ..
                } => {}
                _ if dropped.contains(&t) => {
                    return bad(format!("{} targets dropped stitch {t}", inj.error()));
                }
                _ => {}
            }
            if matches!(
                inj,
                Injection::E3 { .. }
                    | Injection::E4 {
                        mode: E4Mode::LowAspect { .. } | E4Mode::NarrowBite { .. },
                        ..
                    }
            ) && !widths.insert(t)
            {
                return bad(format!("E3 and E4 both reshape stitch {t}"));
            }
        }
        let e1: Vec<usize> = self
            .injections
            .iter()
            .filter(|i| i.error() == ErrorType::E1)
            .map(Injection::target)
            .collect();
        for &k in &e1 {
            let has_prev = (0..k).any(|s| !dropped.contains(&s));
            let has_next = (k + 1..n).any(|s| !dropped.contains(&s));
            if !has_prev || !has_next {
                return bad(format!("E1 target {k} needs a stitch on each side"));
            }
            if e1.contains(&(k + 1)) {
                return bad(format!("E1 targets {k} and {} are adjacent", k + 1));
            }
        }
        Ok(())
    }
}

/// Expected detector output for a synthetic scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthErrors {
    pub image_id: String,
    pub expected_stitches: usize,
    pub report: ErrorReport,
}

impl GroundTruthErrors {
    pub fn counts(&self) -> ErrorCounts {
        self.report.counts()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthScene {
    pub spec: SceneSpec,
    pub annotations: AnnotationSet,
    pub truth: GroundTruthErrors,
    pub vessel_box: RotatedBox,
    /// Generating rectangles in annotation order.
    pub stitch_boxes: Vec<RotatedBox>,
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    u: f64,
    v: f64,
    width: f64,
    height: f64,
    tilt_deg: f64,
}

fn sym(rng: &mut ChaCha8Rng, amp: f64) -> f64 {
    if amp > 0.0 {
        rng.gen_range(-amp..=amp)
    } else {
        0.0
    }
}

/// Bend at `c` between its neighbours, degrees.
fn bend(prev: Vec2, c: Vec2, next: Vec2) -> f64 {
    angle_between_deg(c - prev, next - c)
}

/// Offset across the line that gives the target bend, measured from the
/// point on the chord between the neighbours.
fn solve_bend(prev: Vec2, u: f64, next: Vec2, target_deg: f64, sign: f64) -> f64 {
    let t = (u - prev.x) / (next.x - prev.x);
    let base = prev.y + t * (next.y - prev.y);
    let at = |d: f64| bend(prev, Vec2::new(u, base + sign * d), next);
    let mut hi = (next.x - prev.x).abs().max(1.0);
    while at(hi) < target_deg {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if at(mid) < target_deg {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    base + sign * 0.5 * (lo + hi)
}

fn rect_overlap(a: &RotatedBox, b: &RotatedBox) -> bool {
    let axes = [a.edge_w, a.edge_h, b.edge_w, b.edge_h];
    let (ca, cb) = (a.corners(), b.corners());
    axes.iter().all(|&ax| {
        let proj = |c: &[Point; 4]| {
            c.iter()
                .map(|p| p.dot(ax))
                .fold((f64::MAX, f64::MIN), |(lo, hi), x| (lo.min(x), hi.max(x)))
        };
        let (a0, a1) = proj(&ca);
        let (b0, b1) = proj(&cb);
        a1 > b0 && b1 > a0
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Expect {
    Benign,
    Injected,
    Knock,
}

#[derive(Debug, Clone, Copy)]
enum Rule {
    Above(f64),
    /// Upper threshold on an attribute bounded by `cap`; the margin applies
    /// to the distance from the cap.
    AboveCapped(f64, f64),
    Below(f64),
    Outside(f64, f64),
}

impl Rule {
    fn passes(self, v: f64, expect: Expect, margin: f64, clearance: f64) -> bool {
        let f = match expect {
            Expect::Benign => {
                return match self {
                    Rule::Above(t) | Rule::AboveCapped(t, _) => v <= t / clearance,
                    Rule::Below(t) => v >= t * clearance,
                    Rule::Outside(lo, hi) => v >= lo * clearance && v <= hi / clearance,
                }
            }
            Expect::Injected => margin,
            Expect::Knock => clearance,
        };
        match self {
            Rule::Above(t) => v >= t * f,
            Rule::AboveCapped(t, cap) => cap - v <= (cap - t) / f,
            Rule::Below(t) => v <= t / f,
            Rule::Outside(lo, hi) => v <= lo / f || v >= hi * f,
        }
    }
}

fn check(
    name: &str,
    values: &[f64],
    expect: &[Expect],
    rule: Rule,
    spec: &SceneSpec,
) -> Result<(), SynthError> {
    for (i, (&v, &e)) in values.iter().zip(expect).enumerate() {
        if !rule.passes(v, e, spec.margin_factor, spec.benign_clearance) {
            let what = match e {
                Expect::Benign => "benign",
                Expect::Injected => "injected",
                Expect::Knock => "knock-on",
            };
            return Err(SynthError::Unresolvable(format!(
                "{what} {name}[{i}] = {v:.4} too close to its threshold ({rule:?})"
            )));
        }
    }
    Ok(())
}

/// Builds the scene for `spec`; `seed` drives the jitter only.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<SynthScene, SynthError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.stitch_count;
    let l = spec.vessel_length;
    let spacing = spec.spacing();
    let w0 = spec.nominal_width();
    let h0 = w0 / spec.nominal_aspect;
    let j = spec.jitter;

    let mut slots: Vec<Slot> = (0..n)
        .map(|i| {
            let du = sym(&mut rng, j.along);
            let dv = sym(&mut rng, j.across);
            let tilt = sym(&mut rng, j.angle_deg);
            let dw = sym(&mut rng, j.width_rel);
            Slot {
                u: spacing * (i as f64 + 0.5) + du,
                v: dv,
                width: w0 * (1.0 + dw),
                height: h0,
                tilt_deg: tilt,
            }
        })
        .collect();
    let flip: Vec<bool> = (0..n).map(|_| rng.gen()).collect();

    for inj in &spec.injections {
        match *inj {
            Injection::E2 { target, angle_deg } => {
                slots[target].tilt_deg = if flip[target] { -angle_deg } else { angle_deg };
            }
            Injection::E3 {
                target,
                width_ratio,
            } => slots[target].width = width_ratio * l,
            Injection::E4 { target, mode } => match mode {
                E4Mode::LowAspect { aspect } => slots[target].height = slots[target].width / aspect,
                E4Mode::NarrowBite { width_ratio } => slots[target].width = width_ratio * l,
                E4Mode::Drop => {}
            },
            _ => {}
        }
    }
    for inj in &spec.injections {
        if let Injection::E5 {
            target,
            distance_ratio,
        } = *inj
        {
            let shift = distance_ratio * l - (slots[target + 1].u - slots[target].u);
            for s in &mut slots[target + 1..] {
                s.u += shift;
            }
        }
    }
    let dropped = spec.dropped();
    let present: Vec<usize> = (0..n).filter(|i| !dropped.contains(i)).collect();
    let mean_u = present.iter().map(|&i| slots[i].u).sum::<f64>() / present.len() as f64;
    for s in &mut slots {
        s.u -= mean_u;
    }

    let mut e1: Vec<(usize, f64)> = spec
        .injections
        .iter()
        .filter_map(|i| match *i {
            Injection::E1 { target, bend_deg } => Some((target, bend_deg)),
            _ => None,
        })
        .collect();
    e1.sort_by_key(|e| e.0);
    for (rank, &(k, bend_deg)) in e1.iter().enumerate() {
        let prev = *present.iter().rev().find(|&&s| s < k).expect("validated");
        let next = *present.iter().find(|&&s| s > k).expect("validated");
        let sign = if rank % 2 == 0 { 1.0 } else { -1.0 };
        let p = Vec2::new(slots[prev].u, slots[prev].v);
        let q = Vec2::new(slots[next].u, slots[next].v);
        slots[k].v = solve_bend(p, slots[k].u, q, bend_deg, sign);
    }

    // Local frame to image.
    let theta = spec.rotation_deg.to_radians();
    let to_image = |u: f64, v: f64| Vec2::new(u, v).rotated(theta);
    let vessel = RotatedBox::from_size(Point::ZERO, l, spec.vessel_height, theta);
    let mut stitches: Vec<(usize, RotatedBox)> = present
        .iter()
        .map(|&i| {
            let s = slots[i];
            let angle = theta + std::f64::consts::FRAC_PI_2 + s.tilt_deg.to_radians();
            (
                i,
                RotatedBox::from_size(to_image(s.u, s.v), s.width, s.height, angle),
            )
        })
        .collect();

    for a in 0..stitches.len() {
        for b in a + 1..stitches.len() {
            if rect_overlap(&stitches[a].1, &stitches[b].1) {
                return Err(SynthError::Unresolvable(format!(
                    "stitches {} and {} overlap",
                    stitches[a].0, stitches[b].0
                )));
            }
        }
    }

    const PAD: f64 = 16.0;
    let corners: Vec<Point> = stitches
        .iter()
        .flat_map(|(_, b)| b.corners())
        .chain(vessel.corners())
        .collect();
    let (min, max) = corners.iter().fold(
        (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN)),
        |(lo, hi), p| {
            (
                Vec2::new(lo.x.min(p.x), lo.y.min(p.y)),
                Vec2::new(hi.x.max(p.x), hi.y.max(p.y)),
            )
        },
    );
    let offset = Vec2::new((PAD - min.x).ceil(), (PAD - min.y).ceil());
    let width = (max.x + offset.x + PAD).ceil() as u32;
    let height = (max.y + offset.y + PAD).ceil() as u32;
    let shift = |b: &RotatedBox| b.map(|p| p + offset, |v| v);
    let vessel = shift(&vessel);
    for s in &mut stitches {
        s.1 = shift(&s.1);
    }

    let boxes: Vec<(Option<usize>, RotatedBox)> =
        stitches.iter().map(|&(i, b)| (Some(i), b)).collect();
    let scene = SceneGeometry::from_boxes(vessel, &boxes, SceneOptions::default());
    let report = detect_all(
        &scene,
        &spec.thresholds,
        &DetectionConfig {
            expected_stitches: n,
        },
    );
    validate_against_intent(spec, &scene, &present)?;

    let mut instances = vec![Instance::new(ClassLabel::Vessel, vessel.corners().to_vec())];
    instances.extend(
        stitches
            .iter()
            .map(|(_, b)| Instance::new(ClassLabel::Stitch, b.corners().to_vec())),
    );
    let annotations = AnnotationSet {
        image_id: spec.image_id.clone(),
        width,
        height,
        instances,
    };
    annotations
        .validate()
        .map_err(|e| SynthError::Unresolvable(e.to_string()))?;

    Ok(SynthScene {
        spec: spec.clone(),
        annotations,
        truth: GroundTruthErrors {
            image_id: spec.image_id.clone(),
            expected_stitches: n,
            report,
        },
        vessel_box: vessel,
        stitch_boxes: stitches.into_iter().map(|(_, b)| b).collect(),
    })
}

/// Checks every attribute of the generating scene against what the
/// injections intend.
fn validate_against_intent(
    spec: &SceneSpec,
    scene: &SceneGeometry,
    present: &[usize],
) -> Result<(), SynthError> {
    let n = scene.n();
    // Slot -> position along the detected line.
    let mut pos = vec![usize::MAX; spec.stitch_count];
    for (k, s) in scene.stitches.iter().enumerate() {
        pos[s.instance.expect("set by generator")] = k;
    }
    // The detector must see the slots in line order.
    if present.iter().enumerate().any(|(k, &slot)| pos[slot] != k) {
        return Err(SynthError::Unresolvable(
            "stitch order along the line differs from slot order".into(),
        ));
    }

    let mut e1 = vec![Expect::Benign; n.saturating_sub(2)];
    let mut e2 = vec![Expect::Benign; n];
    let mut e3 = vec![Expect::Benign; n];
    let mut e4a = vec![Expect::Benign; n];
    let mut e4w = vec![Expect::Benign; n];
    let mut e5 = vec![Expect::Benign; n.saturating_sub(1)];
    for inj in &spec.injections {
        let t = inj.target();
        match *inj {
            Injection::E1 { .. } => e1[pos[t] - 1] = Expect::Injected,
            Injection::E2 { .. } => e2[pos[t]] = Expect::Injected,
            Injection::E3 { .. } => e3[pos[t]] = Expect::Injected,
            Injection::E4 { mode, .. } => match mode {
                E4Mode::LowAspect { .. } => e4a[pos[t]] = Expect::Injected,
                E4Mode::NarrowBite { .. } => {
                    e4a[pos[t]] = Expect::Injected;
                    e4w[pos[t]] = Expect::Injected;
                }
                E4Mode::Drop => {}
            },
            Injection::E5 { .. } => e5[pos[t]] = Expect::Injected,
        }
    }
    for (k, w) in present.windows(2).enumerate() {
        if w[1] - w[0] > 1 && e5[k] == Expect::Benign {
            e5[k] = Expect::Knock;
        }
    }

    let t = &spec.thresholds;
    let st = &scene.stitches;
    let alpha: Vec<f64> = st.iter().map(|s| s.alpha).collect();
    let a: Vec<f64> = st.iter().map(|s| s.a).collect();
    let l_wn: Vec<f64> = st.iter().map(|s| s.l_wn).collect();
    check("beta", &scene.beta, &e1, Rule::Above(t.beta_star), spec)?;
    check(
        "alpha",
        &alpha,
        &e2,
        Rule::AboveCapped(t.alpha_star, 45.0),
        spec,
    )?;
    check("l_wn", &l_wn, &e3, Rule::Above(t.l_w_plus), spec)?;
    check("a", &a, &e4a, Rule::Below(t.a_star), spec)?;
    check("l_wn", &l_wn, &e4w, Rule::Below(t.l_w_minus), spec)?;
    check(
        "l_d",
        &scene.l_d,
        &e5,
        Rule::Outside(t.l_d_minus, t.l_d_plus),
        spec,
    )?;
    Ok(())
}

/// Knobs for [`random_scene_spec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomSpecOptions {
    /// Upper bound on injections drawn per error type.
    pub max_per_type: usize,
    /// Upper bound on stitches added to `base.stitch_count`.
    pub extra_stitches: usize,
}

impl Default for RandomSpecOptions {
    fn default() -> Self {
        Self {
            max_per_type: 4,
            extra_stitches: 3,
        }
    }
}

/// Draws a random spec from `base`: up to `extra_stitches` more stitches, a
/// random line direction within 75 degrees of horizontal, and up to
/// `max_per_type` injections of each error type with magnitudes inside the
/// margin. Infeasible placements are skipped, so counts may fall short.
pub fn random_scene_spec(
    base: &SceneSpec,
    options: &RandomSpecOptions,
    rng: &mut impl Rng,
) -> SceneSpec {
    let max_per_type = options.max_per_type;
    let mut spec = base.clone();
    spec.stitch_count = base.stitch_count + rng.gen_range(0..=options.extra_stitches);
    spec.rotation_deg = rng.gen_range(-75.0..75.0);
    spec.injections.clear();
    let n = spec.stitch_count;
    let t = spec.thresholds;
    let (m, c) = (spec.margin_factor, spec.benign_clearance);
    let pick = |rng: &mut dyn rand::RngCore, candidates: Vec<usize>, k: usize| -> Vec<usize> {
        let mut c = candidates;
        let mut out = Vec::new();
        while out.len() < k && !c.is_empty() {
            out.push(c.swap_remove(rng.gen_range(0..c.len())));
        }
        out
    };
    let range = |rng: &mut dyn rand::RngCore, lo: f64, hi: f64| {
        if lo < hi {
            Some(rng.gen_range(lo..hi))
        } else {
            None
        }
    };

    // E4 first: drops constrain the rest.
    let mut dropped = BTreeSet::new();
    let mut reshaped = BTreeSet::new();
    let k4 = rng.gen_range(0..=max_per_type);
    for target in pick(rng, (0..n).collect(), k4) {
        let mode = match rng.gen_range(0..3) {
            0 if dropped.len() + 3 < n => {
                dropped.insert(target);
                E4Mode::Drop
            }
            1 => match range(rng, 0.6 * t.l_w_minus / m, 0.9 * t.l_w_minus / m) {
                Some(width_ratio) => E4Mode::NarrowBite { width_ratio },
                None => continue,
            },
            _ => match range(rng, 0.7 * t.a_star / m, 0.95 * t.a_star / m) {
                Some(aspect) => E4Mode::LowAspect { aspect },
                None => continue,
            },
        };
        if mode != E4Mode::Drop {
            reshaped.insert(target);
        }
        spec.injections.push(Injection::E4 { target, mode });
    }
    let live: Vec<usize> = (0..n).filter(|i| !dropped.contains(i)).collect();

    let k3 = rng.gen_range(0..=max_per_type);
    let free: Vec<usize> = live
        .iter()
        .copied()
        .filter(|i| !reshaped.contains(i))
        .collect();
    for target in pick(rng, free, k3) {
        if let Some(width_ratio) = range(rng, 1.05 * t.l_w_plus * m, 1.25 * t.l_w_plus * m) {
            spec.injections.push(Injection::E3 {
                target,
                width_ratio,
            });
        }
    }

    // Near-square stitches have no reliable orientation; keep tilts off them.
    let narrow: BTreeSet<usize> = spec
        .injections
        .iter()
        .filter_map(|i| match *i {
            Injection::E4 {
                target,
                mode: E4Mode::NarrowBite { .. },
            } => Some(target),
            _ => None,
        })
        .collect();
    let k2 = rng.gen_range(0..=max_per_type);
    let tiltable: Vec<usize> = live
        .iter()
        .copied()
        .filter(|i| !narrow.contains(i))
        .collect();
    for target in pick(rng, tiltable, k2) {
        let lo = 45.0 - (45.0 - t.alpha_star) / m + 0.5;
        if let Some(angle_deg) = range(rng, lo, 44.0) {
            spec.injections.push(Injection::E2 { target, angle_deg });
        }
    }

    let k1 = rng.gen_range(0..=max_per_type);
    let interior: Vec<usize> = live[1..live.len() - 1].to_vec();
    let mut e1 = BTreeSet::new();
    for target in pick(rng, interior, k1) {
        if e1.contains(&(target + 1)) || (target > 0 && e1.contains(&(target - 1))) {
            continue;
        }
        // The neighbouring bends come out at about half the injected bend.
        if let Some(bend_deg) = range(rng, 1.02 * t.beta_star * m, 0.98 * 2.0 * t.beta_star / c) {
            e1.insert(target);
            spec.injections.push(Injection::E1 { target, bend_deg });
        }
    }

    let k5 = rng.gen_range(0..=max_per_type);
    let gaps: Vec<usize> = (0..n - 1)
        .filter(|g| !dropped.contains(g) && !dropped.contains(&(g + 1)))
        .collect();
    for target in pick(rng, gaps, k5) {
        let ratio = if rng.gen() {
            range(rng, 1.03 * t.l_d_plus * m, 1.2 * t.l_d_plus * m)
        } else {
            range(rng, 0.75 * t.l_d_minus / m, 0.95 * t.l_d_minus / m)
        };
        if let Some(distance_ratio) = ratio {
            spec.injections.push(Injection::E5 {
                target,
                distance_ratio,
            });
        }
    }
    spec
}

/// Draws random specs until one generates, up to `max_attempts`.
pub fn random_scene(
    base: &SceneSpec,
    options: &RandomSpecOptions,
    rng: &mut impl Rng,
    max_attempts: usize,
) -> Result<SynthScene, SynthError> {
    for _ in 0..max_attempts {
        let spec = random_scene_spec(base, options, rng);
        if let Ok(scene) = generate_scene(&spec, rng.gen()) {
            return Ok(scene);
        }
    }
    Err(SynthError::Exhausted(max_attempts))
}

pub const SYNTH_RATER: &str = "synth";
pub const SYNTH_TRIAL: &str = "t1";

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub scenes: Vec<SynthScene>,
    /// Ground-truth counts as rater `synth`, trial `t1`.
    pub scores: RaterScoreTable,
}

/// `count` random scenes named `<base.image_id>_<index>`. Scores count
/// missing stitches against each scene's own stitch count, so a corpus meant
/// for calibration should use `extra_stitches = 0`.
pub fn generate_corpus(
    base: &SceneSpec,
    count: usize,
    options: &RandomSpecOptions,
    seed: u64,
) -> Result<Corpus, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = count.saturating_sub(1).to_string().len().max(3);
    let mut scenes = Vec::with_capacity(count);
    for i in 0..count {
        let mut b = base.clone();
        b.image_id = format!("{}_{i:0width$}", base.image_id);
        scenes.push(random_scene(&b, options, &mut rng, 10_000)?);
    }
    let scores = scenes
        .iter()
        .map(|s| {
            (
                ScoreKey::new(&s.annotations.image_id, SYNTH_RATER, SYNTH_TRIAL),
                s.truth.counts(),
            )
        })
        .collect();
    Ok(Corpus { scenes, scores })
}
