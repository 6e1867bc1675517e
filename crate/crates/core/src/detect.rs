//! Threshold configuration and error counting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interchange::{ErrorCounts, Parsed};
use crate::scene::SceneGeometry;
use crate::ErrorType;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("malformed threshold document: {0}")]
    Malformed(String),
    #[error("threshold `{0}` must be a finite number")]
    NotANumber(&'static str),
    #[error("threshold `{0}` must be positive, got {1}")]
    NotPositive(&'static str, f64),
    #[error("`{lower}` ({lo}) must be below `{upper}` ({hi})")]
    Ordering {
        lower: &'static str,
        upper: &'static str,
        lo: f64,
        hi: f64,
    },
}

/// The seven decision thresholds. Angles are in degrees, the rest are
/// ratios.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub beta_star: f64,
    pub alpha_star: f64,
    pub a_star: f64,
    pub l_w_minus: f64,
    pub l_w_plus: f64,
    pub l_d_minus: f64,
    pub l_d_plus: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            beta_star: 29.80,
            alpha_star: 38.11,
            a_star: 2.43,
            l_w_minus: 0.06,
            l_w_plus: 0.13,
            l_d_minus: 0.07,
            l_d_plus: 0.148,
        }
    }
}

impl Thresholds {
    pub const FIELDS: [&'static str; 7] = [
        "beta_star",
        "alpha_star",
        "a_star",
        "l_w_minus",
        "l_w_plus",
        "l_d_minus",
        "l_d_plus",
    ];

    fn values(&self) -> [f64; 7] {
        [
            self.beta_star,
            self.alpha_star,
            self.a_star,
            self.l_w_minus,
            self.l_w_plus,
            self.l_d_minus,
            self.l_d_plus,
        ]
    }

    fn field_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "beta_star" => &mut self.beta_star,
            "alpha_star" => &mut self.alpha_star,
            "a_star" => &mut self.a_star,
            "l_w_minus" => &mut self.l_w_minus,
            "l_w_plus" => &mut self.l_w_plus,
            "l_d_minus" => &mut self.l_d_minus,
            "l_d_plus" => &mut self.l_d_plus,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), ThresholdError> {
        for (name, v) in Self::FIELDS.iter().zip(self.values()) {
            if !v.is_finite() {
                return Err(ThresholdError::NotANumber(name));
            }
            if v <= 0.0 {
                return Err(ThresholdError::NotPositive(name, v));
            }
        }
        let pairs = [
            ("l_w_minus", "l_w_plus", self.l_w_minus, self.l_w_plus),
            ("l_d_minus", "l_d_plus", self.l_d_minus, self.l_d_plus),
        ];
        for (lower, upper, lo, hi) in pairs {
            if lo >= hi {
                return Err(ThresholdError::Ordering {
                    lower,
                    upper,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Serializes in the format read by [`load_thresholds`].
    pub fn to_toml_string(&self) -> String {
        Self::FIELDS
            .iter()
            .zip(self.values())
            .map(|(k, v)| format!("{k} = {v:?}\n"))
            .collect()
    }
}

/// Reads a TOML key-value document. Missing keys take their default value;
/// unknown keys are ignored with a warning. Integers are accepted for any
/// field.
pub fn load_thresholds(doc: &str) -> Result<Parsed<Thresholds>, ThresholdError> {
    let table: toml::Table = doc
        .parse()
        .map_err(|e: toml::de::Error| ThresholdError::Malformed(e.to_string()))?;
    let mut t = Thresholds::default();
    let mut warnings = Vec::new();
    for (key, value) in &table {
        let Some(slot) = t.field_mut(key) else {
            warnings.push(format!("ignoring unknown threshold `{key}`"));
            continue;
        };
        let name = Thresholds::FIELDS
            .iter()
            .find(|f| *f == key)
            .copied()
            .unwrap_or("?");
        *slot = match value {
            toml::Value::Float(f) => *f,
            toml::Value::Integer(i) => *i as f64,
            _ => return Err(ThresholdError::NotANumber(name)),
        };
    }
    t.validate()?;
    Ok(Parsed { value: t, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Number of stitches a complete anastomosis should have.
    pub expected_stitches: usize,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            expected_stitches: 8,
        }
    }
}

/// Error counts plus the flags they were counted from. Flag vectors are
/// indexed like the scene: `e1` by bend (`n - 2`), `e5` by gap (`n - 1`),
/// the rest by stitch (`n`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub s1: u32,
    pub s2: u32,
    pub s3: u32,
    pub s4: u32,
    pub s5: u32,
    pub e1_flags: Vec<bool>,
    pub e2_flags: Vec<bool>,
    pub e3_flags: Vec<bool>,
    pub e4_aspect_flags: Vec<bool>,
    pub e4_width_flags: Vec<bool>,
    pub e5_flags: Vec<bool>,
    pub missing_count: u32,
    pub notes: Vec<String>,
}

impl ErrorReport {
    pub fn counts(&self) -> ErrorCounts {
        ErrorCounts([self.s1, self.s2, self.s3, self.s4, self.s5])
    }

    pub fn count(&self, error: ErrorType) -> u32 {
        self.counts().get(error)
    }
}

fn flags<I: IntoIterator<Item = f64>>(values: I, pred: impl Fn(f64) -> bool) -> Vec<bool> {
    values.into_iter().map(pred).collect()
}

fn set_count(f: &[bool]) -> u32 {
    f.iter().filter(|&&b| b).count() as u32
}

pub fn detect_all(scene: &SceneGeometry, t: &Thresholds, config: &DetectionConfig) -> ErrorReport {
    let st = &scene.stitches;
    let e1_flags = flags(scene.beta.iter().copied(), |b| b > t.beta_star);
    let e2_flags = flags(st.iter().map(|s| s.alpha), |a| a > t.alpha_star);
    let e3_flags = flags(st.iter().map(|s| s.l_wn), |w| w > t.l_w_plus);
    let e4_aspect_flags = flags(st.iter().map(|s| s.a), |a| a < t.a_star);
    let e4_width_flags = flags(st.iter().map(|s| s.l_wn), |w| w < t.l_w_minus);
    let e5_flags = flags(scene.l_d.iter().copied(), |d| {
        d < t.l_d_minus || d > t.l_d_plus
    });
    let missing_count = config.expected_stitches.saturating_sub(st.len()) as u32;

    let mut notes = Vec::new();
    if st.len() < 3 {
        notes.push(format!("insufficient stitches for E1 ({} < 3)", st.len()));
    }
    if st.len() < 2 {
        notes.push(format!("insufficient stitches for E5 ({} < 2)", st.len()));
    }

    ErrorReport {
        s1: set_count(&e1_flags),
        s2: set_count(&e2_flags),
        s3: set_count(&e3_flags),
        s4: set_count(&e4_aspect_flags) + set_count(&e4_width_flags) + missing_count,
        s5: set_count(&e5_flags),
        e1_flags,
        e2_flags,
        e3_flags,
        e4_aspect_flags,
        e4_width_flags,
        e5_flags,
        missing_count,
        notes,
    }
}
