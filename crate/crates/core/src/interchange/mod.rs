//! Annotation and score data model, its file formats, and polygon
//! rasterization.
//!
//! Annotation documents are JSON, one per image:
//!
//! ```json
//! {
//!   "image_id": "img1",
//!   "width": 640,
//!   "height": 480,
//!   "instances": [
//!     { "class": "vessel", "polygon": [[10, 10], [600, 12], [598, 300], [8, 298]] },
//!     { "class": "stitch", "polygon": [[...]], "confidence": 0.93 }
//!   ]
//! }
//! ```
//!
//! Unknown fields are ignored and reported as warnings.

mod raster;
mod scores;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::geometry::{signed_area, Point, Vec2};

pub use raster::{rasterize, BinaryMask, PixelWindow, Rasterized};
pub use scores::{parse_scores, ErrorCounts, RaterScoreTable, ScoreKey};

#[derive(Debug, Error)]
pub enum InterchangeError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("missing or invalid field `{0}`")]
    Field(&'static str),
    #[error("instance {index}: {reason}")]
    Instance { index: usize, reason: String },
    #[error("score file: {0}")]
    Scores(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Stitch,
    Vessel,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::Stitch, ClassLabel::Vessel];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Stitch => "stitch",
            ClassLabel::Vessel => "vessel",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "stitch" => Some(ClassLabel::Stitch),
            "vessel" => Some(ClassLabel::Vessel),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    #[serde(rename = "class")]
    pub class_label: ClassLabel,
    pub polygon: Vec<Point>,
    /// Detector score; absent for ground truth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl Instance {
    pub fn new(class_label: ClassLabel, polygon: Vec<Point>) -> Self {
        Self {
            class_label,
            polygon,
            confidence: None,
        }
    }

    /// Tight axis-aligned bounds `(xmin, ymin, xmax, ymax)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        self.polygon.iter().fold(
            (f64::MAX, f64::MAX, f64::MIN, f64::MIN),
            |(x0, y0, x1, y1), p| (x0.min(p.x), y0.min(p.y), x1.max(p.x), y1.max(p.y)),
        )
    }

    pub fn rasterize(&self, width: u32, height: u32) -> BinaryMask {
        rasterize(&self.polygon, width, height).mask
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationSet {
    pub image_id: String,
    pub width: u32,
    pub height: u32,
    pub instances: Vec<Instance>,
}

/// A parsed document plus the non-fatal issues found while reading it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<String>,
}

impl AnnotationSet {
    pub fn instances_of(&self, class: ClassLabel) -> impl Iterator<Item = (usize, &Instance)> {
        self.instances
            .iter()
            .enumerate()
            .filter(move |(_, inst)| inst.class_label == class)
    }

    /// Checks every invariant of the set and its instances.
    pub fn validate(&self) -> Result<(), InterchangeError> {
        if self.image_id.is_empty() {
            return Err(InterchangeError::Field("image_id"));
        }
        if self.width == 0 {
            return Err(InterchangeError::Field("width"));
        }
        if self.height == 0 {
            return Err(InterchangeError::Field("height"));
        }
        for (index, inst) in self.instances.iter().enumerate() {
            let fail = |reason: String| InterchangeError::Instance { index, reason };
            if inst.polygon.len() < 3 {
                return Err(fail(format!(
                    "polygon has {} vertices, at least 3 required",
                    inst.polygon.len()
                )));
            }
            for p in &inst.polygon {
                let inside = p.is_finite()
                    && p.x >= 0.0
                    && p.y >= 0.0
                    && p.x <= self.width as f64
                    && p.y <= self.height as f64;
                if !inside {
                    return Err(fail(format!(
                        "vertex ({}, {}) outside the {}x{} image",
                        p.x, p.y, self.width, self.height
                    )));
                }
            }
            let area = signed_area(&inst.polygon).abs();
            if area.is_nan() || area == 0.0 {
                return Err(fail("polygon has zero area".into()));
            }
            if let Some(c) = inst.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(fail(format!("confidence {c} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// Maps every vertex through `f`, then shifts the result so the smallest
    /// coordinate sits at `pad` and resizes the image to fit with the same pad.
    pub fn transformed(&self, f: impl Fn(Point) -> Point, pad: f64) -> AnnotationSet {
        let mut instances: Vec<Instance> = self
            .instances
            .iter()
            .map(|inst| Instance {
                polygon: inst.polygon.iter().map(|&p| f(p)).collect(),
                ..inst.clone()
            })
            .collect();
        let (x0, y0, x1, y1) = instances.iter().map(Instance::bounds).fold(
            (f64::MAX, f64::MAX, f64::MIN, f64::MIN),
            |(a, b, c, d), (x0, y0, x1, y1)| (a.min(x0), b.min(y0), c.max(x1), d.max(y1)),
        );
        let shift = Vec2::new(pad - x0, pad - y0);
        for inst in &mut instances {
            for p in &mut inst.polygon {
                *p = *p + shift;
            }
        }
        AnnotationSet {
            image_id: self.image_id.clone(),
            width: (x1 - x0 + 2.0 * pad).ceil().max(1.0) as u32,
            height: (y1 - y0 + 2.0 * pad).ceil().max(1.0) as u32,
            instances,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("annotation sets always serialize")
    }
}

fn warn_unknown(
    obj: &Map<String, Value>,
    known: &[&str],
    context: &str,
    warnings: &mut Vec<String>,
) {
    for k in obj.keys() {
        if !known.contains(&k.as_str()) {
            warnings.push(format!("{context}: ignoring unknown field `{k}`"));
        }
    }
}

fn as_u32(v: Option<&Value>, field: &'static str) -> Result<u32, InterchangeError> {
    v.and_then(Value::as_u64)
        .and_then(|n| u32::try_from(n).ok())
        .ok_or(InterchangeError::Field(field))
}

fn parse_instance(
    index: usize,
    v: &Value,
    warnings: &mut Vec<String>,
) -> Result<Instance, InterchangeError> {
    let fail = |reason: String| InterchangeError::Instance { index, reason };
    let obj = v.as_object().ok_or_else(|| fail("not an object".into()))?;
    warn_unknown(
        obj,
        &["class", "polygon", "confidence"],
        &format!("instance {index}"),
        warnings,
    );

    let class_str = obj
        .get("class")
        .and_then(Value::as_str)
        .ok_or_else(|| fail("missing `class`".into()))?;
    let class_label = ClassLabel::parse(class_str)
        .ok_or_else(|| fail(format!("unknown class label `{class_str}`")))?;

    let raw = obj
        .get("polygon")
        .and_then(Value::as_array)
        .ok_or_else(|| fail("missing `polygon`".into()))?;
    let polygon = raw
        .iter()
        .map(|pt| match pt.as_array().map(Vec::as_slice) {
            Some([x, y]) => match (x.as_f64(), y.as_f64()) {
                (Some(x), Some(y)) => Ok(Point::new(x, y)),
                _ => Err(fail("polygon vertex is not numeric".into())),
            },
            _ => Err(fail("polygon vertex is not an [x, y] pair".into())),
        })
        .collect::<Result<Vec<_>, _>>()?;

    let confidence = match obj.get("confidence") {
        None | Some(Value::Null) => None,
        Some(c) => Some(
            c.as_f64()
                .ok_or_else(|| fail("`confidence` is not a number".into()))?,
        ),
    };

    Ok(Instance {
        class_label,
        polygon,
        confidence,
    })
}

/// Parses and validates one annotation document. Instance order is kept.
pub fn parse_annotation_file(bytes: &[u8]) -> Result<Parsed<AnnotationSet>, InterchangeError> {
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| InterchangeError::Malformed(e.to_string()))?;
    let obj = doc
        .as_object()
        .ok_or_else(|| InterchangeError::Malformed("top level is not an object".into()))?;
    let mut warnings = Vec::new();
    warn_unknown(
        obj,
        &["image_id", "width", "height", "instances"],
        "document",
        &mut warnings,
    );

    let image_id = obj
        .get("image_id")
        .and_then(Value::as_str)
        .ok_or(InterchangeError::Field("image_id"))?
        .to_owned();
    let width = as_u32(obj.get("width"), "width")?;
    let height = as_u32(obj.get("height"), "height")?;
    let instances = obj
        .get("instances")
        .and_then(Value::as_array)
        .ok_or(InterchangeError::Field("instances"))?
        .iter()
        .enumerate()
        .map(|(i, v)| parse_instance(i, v, &mut warnings))
        .collect::<Result<Vec<_>, _>>()?;

    let set = AnnotationSet {
        image_id,
        width,
        height,
        instances,
    };
    set.validate()?;
    Ok(Parsed {
        value: set,
        warnings,
    })
}
