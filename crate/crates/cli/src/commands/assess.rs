use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anastomosis_core::{build_scene, detect_all, load_thresholds, DetectionConfig, Thresholds};
use anyhow::{anyhow, Context, Result};
use rayon::prelude::*;

use crate::fsio::{self, write_atomic};
use crate::report::{AssessSummary, AssessmentReport, ImageOutcome, ImageStatus};
use crate::svg;
use crate::{AssessArgs, CliError, Status};

pub const SUMMARY_FILE: &str = "summary.json";

struct Assessed {
    image_id: String,
    report: String,
    svg: String,
    counts: [u32; 5],
}

pub fn load_threshold_file(path: Option<&Path>) -> Result<Thresholds> {
    let Some(path) = path else {
        return Ok(Thresholds::default());
    };
    let text = fsio::read_to_string(path, "threshold file")?;
    let parsed = load_thresholds(&text)
        .with_context(|| format!("invalid threshold file {}", path.display()))?;
    fsio::warn_all(&path.display().to_string(), &parsed.warnings);
    Ok(parsed.value)
}

fn assess_one(path: &Path, thresholds: &Thresholds, config: &DetectionConfig) -> Result<Assessed> {
    let parsed = fsio::read_annotation(path)?;
    let annotations = parsed.value;
    let scene = build_scene(&annotations).map_err(|e| anyhow!("{}: {e}", annotations.image_id))?;
    let errors = detect_all(&scene, thresholds, config);
    let svg = svg::render(
        &annotations.image_id,
        annotations.width,
        annotations.height,
        &scene,
        &errors,
    );
    let mut warnings = parsed.warnings;
    warnings.extend(scene.warnings.iter().cloned());
    let report = AssessmentReport::new(
        &annotations.image_id,
        &scene,
        errors,
        *thresholds,
        config.expected_stitches,
        warnings,
    );
    Ok(Assessed {
        image_id: annotations.image_id,
        counts: report.counts,
        report: serde_json::to_string_pretty(&report)? + "\n",
        svg,
    })
}

pub fn run(args: &AssessArgs) -> Result<Status, CliError> {
    let thresholds = load_threshold_file(args.thresholds.as_deref())?;
    let inputs = fsio::expand_inputs(&args.inputs).map_err(CliError::usage)?;
    fsio::create_dir(&args.out)?;
    let config = DetectionConfig {
        expected_stitches: args.expected_stitches,
    };

    let results: Vec<(PathBuf, Result<Assessed>)> = inputs
        .par_iter()
        .map(|p| (p.clone(), assess_one(p, &thresholds, &config)))
        .collect();

    let mut stems: BTreeMap<String, String> = BTreeMap::new();
    let mut images = Vec::with_capacity(results.len());
    for (path, result) in results {
        let input = path.display().to_string();
        let outcome = result.and_then(|a| {
            let stem = fsio::file_stem(&a.image_id);
            if let Some(first) = stems.get(&stem) {
                return Err(anyhow!(
                    "image id `{}` collides with an earlier output from {first}",
                    a.image_id
                ));
            }
            stems.insert(stem.clone(), input.clone());
            write_atomic(
                &args.out.join(format!("{stem}.report.json")),
                a.report.as_bytes(),
            )?;
            write_atomic(&args.out.join(format!("{stem}.svg")), a.svg.as_bytes())?;
            Ok(a)
        });
        images.push(match outcome {
            Ok(a) => ImageOutcome {
                input,
                image_id: Some(a.image_id),
                status: ImageStatus::Ok,
                counts: Some(a.counts),
                error: None,
            },
            Err(e) => {
                eprintln!("error: {input}: {e:#}");
                ImageOutcome {
                    input,
                    image_id: None,
                    status: ImageStatus::Failed,
                    counts: None,
                    error: Some(format!("{e:#}")),
                }
            }
        });
    }

    let failed = images
        .iter()
        .filter(|i| i.status == ImageStatus::Failed)
        .count();
    let summary = AssessSummary {
        processed: images.len() - failed,
        failed,
        images,
    };
    write_atomic(
        &args.out.join(SUMMARY_FILE),
        (serde_json::to_string_pretty(&summary).map_err(anyhow::Error::from)? + "\n").as_bytes(),
    )?;
    eprintln!("assessed {} image(s), {failed} failed", summary.processed);
    Ok(match failed {
        0 => Status::Success,
        f if f == summary.images.len() => Status::Fatal,
        _ => Status::Partial,
    })
}
