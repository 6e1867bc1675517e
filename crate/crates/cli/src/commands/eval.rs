use std::path::Path;

use anastomosis_core::eval::{default_iou_thresholds, evaluate};
use anastomosis_core::AnnotationSet;
use anyhow::{anyhow, Context, Result};

use crate::fsio::{self, write_atomic};
use crate::{CliError, EvalArgs, Status};

fn load_dir(dir: &Path) -> Result<Vec<AnnotationSet>> {
    let files = fsio::json_files(dir)?;
    if files.is_empty() {
        return Err(anyhow!("no annotation files in {}", dir.display()));
    }
    files
        .iter()
        .map(|p| {
            let parsed = fsio::read_annotation(p)?;
            fsio::warn_all(&p.display().to_string(), &parsed.warnings);
            Ok(parsed.value)
        })
        .collect()
}

pub fn run(args: &EvalArgs) -> Result<Status, CliError> {
    let predictions = load_dir(&args.pred)?;
    let ground_truth = load_dir(&args.gt)?;
    let report = evaluate(&predictions, &ground_truth, &default_iou_thresholds())
        .context("evaluating predictions")?;
    fsio::warn_all("eval", &report.warnings);
    let text = serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)? + "\n";
    match &args.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(Status::Success)
}
