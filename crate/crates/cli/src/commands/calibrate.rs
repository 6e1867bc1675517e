use std::collections::{BTreeMap, BTreeSet};

use anastomosis_core::calibration::{
    calibrate_pair, calibrate_single, clean_dataset, CalibrationDataset, CalibrationSample,
    ImageAttributes,
};
use anastomosis_core::interchange::ErrorCounts;
use anastomosis_core::{build_scene, parse_scores, ErrorType, Thresholds};
use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use crate::fsio::{self, write_atomic};
use crate::{CalibrateArgs, CliError, Status};

/// One calibrated threshold pair or single value, for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Fitted {
    pub error: ErrorType,
    /// `(field, value)` pairs in config order.
    pub values: Vec<(&'static str, f64)>,
    pub j: f64,
    pub pool: usize,
    pub misclassified: usize,
    pub degenerate: bool,
    pub images: usize,
    pub warnings: Vec<String>,
}

fn pick_one(
    kind: &str,
    given: Option<&String>,
    available: BTreeSet<String>,
) -> Result<String, CliError> {
    if let Some(g) = given {
        if !available.contains(g) {
            return Err(CliError::usage(anyhow!(
                "{kind} `{g}` not in the score file (have: {})",
                available.into_iter().collect::<Vec<_>>().join(", ")
            )));
        }
        return Ok(g.clone());
    }
    match available.len() {
        1 => Ok(available.into_iter().next().unwrap()),
        0 => Err(anyhow!("score file has no rows").into()),
        _ => Err(CliError::usage(anyhow!(
            "score file has several {kind}s ({}); choose one with --{kind}",
            available.into_iter().collect::<Vec<_>>().join(", ")
        ))),
    }
}

type Sessions<'a> = (
    &'a BTreeMap<String, ErrorCounts>,
    &'a BTreeMap<String, ErrorCounts>,
);

/// Calibrates all five error types; `clean` restricts each to images the
/// two sessions agree on for that error.
pub fn calibrate_all(
    ds: &CalibrationDataset,
    clean: Option<Sessions<'_>>,
    grid_step: f64,
) -> Result<Vec<Fitted>> {
    let mut out = Vec::new();
    for error in ErrorType::ALL {
        let (subset, mut warnings) = match clean {
            Some((t1, t2)) => {
                let c = clean_dataset(t1, t2, error);
                let mut w = c.warnings;
                if !c.removed.is_empty() {
                    w.push(format!("{} image(s) removed by cleaning", c.removed.len()));
                }
                (ds.restricted_to(&c.retained), w)
            }
            None => (ds.clone(), Vec::new()),
        };
        let fitted = match error {
            ErrorType::E1 | ErrorType::E2 | ErrorType::E3 => {
                let c = calibrate_single(&subset, error)
                    .with_context(|| format!("calibrating {error}"))?;
                let field = match error {
                    ErrorType::E1 => "beta_star",
                    ErrorType::E2 => "alpha_star",
                    _ => "l_w_plus",
                };
                warnings.extend(c.warnings.iter().cloned());
                Fitted {
                    error,
                    values: vec![(field, c.threshold)],
                    j: c.j,
                    pool: c.pool.len(),
                    misclassified: c.misclassified(),
                    degenerate: c.degenerate,
                    images: subset.len(),
                    warnings,
                }
            }
            ErrorType::E4 | ErrorType::E5 => {
                let c = calibrate_pair(&subset, error, grid_step)
                    .with_context(|| format!("calibrating {error}"))?;
                let fields = if error == ErrorType::E4 {
                    [("l_w_minus", c.lower), ("a_star", c.roc_threshold)]
                } else {
                    [("l_d_minus", c.lower), ("l_d_plus", c.roc_threshold)]
                };
                warnings.extend(c.warnings.iter().cloned());
                Fitted {
                    error,
                    values: fields.to_vec(),
                    j: c.j,
                    pool: c.pool.len() + c.fixed.len(),
                    misclassified: c.misclassified(),
                    degenerate: c.degenerate,
                    images: subset.len(),
                    warnings,
                }
            }
        };
        out.push(fitted);
    }
    Ok(out)
}

/// Assembles a config from fitted values; fails on degenerate or
/// inconsistent results.
pub fn thresholds_from(fitted: &[Fitted]) -> Result<Thresholds> {
    let bad: Vec<String> = fitted
        .iter()
        .filter(|f| f.degenerate || f.values.iter().any(|(_, v)| !v.is_finite()))
        .map(|f| {
            format!(
                "{} degenerate (J = {:.3} over {} pooled values)",
                f.error, f.j, f.pool
            )
        })
        .collect();
    if !bad.is_empty() {
        bail!("no usable thresholds: {}", bad.join("; "));
    }
    let mut text = String::new();
    for f in fitted {
        for (field, v) in &f.values {
            text.push_str(&format!("{field} = {v:?}\n"));
        }
    }
    let t = anastomosis_core::load_thresholds(&text)?.value;
    Ok(t)
}

pub fn run(args: &CalibrateArgs) -> Result<Status, CliError> {
    let score_text = std::fs::read(&args.scores)
        .with_context(|| format!("cannot read score file {}", args.scores.display()))?;
    let table = parse_scores(&score_text)
        .with_context(|| format!("invalid score file {}", args.scores.display()))?;
    fsio::warn_all(&args.scores.display().to_string(), &table.warnings);
    let table = table.value;
    let sessions = table.sessions();

    let rater = pick_one(
        "rater",
        args.rater.as_ref(),
        sessions.iter().map(|(r, _)| r.clone()).collect(),
    )?;
    let trials: BTreeSet<String> = sessions
        .iter()
        .filter(|(r, _)| *r == rater)
        .map(|(_, t)| t.clone())
        .collect();
    let clean_pair = match args.clean.as_deref() {
        None => None,
        Some([a, b]) => {
            for t in [a, b] {
                if !trials.contains(t) {
                    return Err(CliError::usage(anyhow!(
                        "trial `{t}` has no scores for rater `{rater}`"
                    )));
                }
            }
            Some((a.clone(), b.clone()))
        }
        Some(other) => {
            return Err(CliError::usage(anyhow!(
                "--clean takes two trials, got {}",
                other.len()
            )));
        }
    };
    let trial = match (&args.trial, &clean_pair) {
        (None, Some((a, _))) => a.clone(),
        _ => pick_one("trial", args.trial.as_ref(), trials)?,
    };
    let scores = table.session(&rater, &trial);

    let files = fsio::json_files(&args.annotations)?;
    if files.is_empty() {
        return Err(anyhow!("no annotation files in {}", args.annotations.display()).into());
    }
    let attributes: Vec<Result<ImageAttributes>> = files
        .par_iter()
        .map(|path| {
            let parsed = fsio::read_annotation(path)?;
            fsio::warn_all(&path.display().to_string(), &parsed.warnings);
            let a = parsed.value;
            let scene = build_scene(&a).map_err(|e| anyhow!("{}: {e}", path.display()))?;
            Ok(ImageAttributes::from_scene(a.image_id.clone(), &scene))
        })
        .collect();
    let attributes: Vec<ImageAttributes> = attributes.into_iter().collect::<Result<_>>()?;

    let mut seen = BTreeSet::new();
    for a in &attributes {
        if !seen.insert(a.image_id.clone()) {
            return Err(anyhow!(
                "image id `{}` appears in more than one annotation file",
                a.image_id
            )
            .into());
        }
    }
    let missing: Vec<&str> = attributes
        .iter()
        .filter(|a| !scores.contains_key(&a.image_id))
        .map(|a| a.image_id.as_str())
        .collect();
    if !missing.is_empty() {
        return Err(anyhow!(
            "no scores for rater `{rater}`, trial `{trial}` on image(s): {}",
            missing.join(", ")
        )
        .into());
    }
    let unused = scores.keys().filter(|k| !seen.contains(*k)).count();
    if unused > 0 {
        eprintln!("warning: {unused} scored image(s) have no annotation file and are ignored");
    }

    let samples = attributes
        .into_iter()
        .map(|a| CalibrationSample {
            scores: scores[&a.image_id],
            attributes: a,
        })
        .collect();
    let ds = CalibrationDataset::new(samples, args.expected_stitches);

    let sessions_for_clean = clean_pair
        .as_ref()
        .map(|(a, b)| (table.session(&rater, a), table.session(&rater, b)));
    let fitted = calibrate_all(
        &ds,
        sessions_for_clean.as_ref().map(|(a, b)| (a, b)),
        args.grid_step,
    )?;

    for f in &fitted {
        let values: Vec<String> = f
            .values
            .iter()
            .map(|(k, v)| format!("{k} = {v:.4}"))
            .collect();
        eprintln!(
            "{}: {} (J = {:.3}, {} pooled, {} misclassified, {} images)",
            f.error,
            values.join(", "),
            f.j,
            f.pool,
            f.misclassified,
            f.images
        );
        fsio::warn_all(&f.error.to_string(), &f.warnings);
    }

    match thresholds_from(&fitted) {
        Ok(t) => {
            write_atomic(&args.out, t.to_toml_string().as_bytes())?;
            Ok(Status::Success)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            Ok(Status::Partial)
        }
    }
}
