use std::path::Path;

use anastomosis_core::interchange::{RaterScoreTable, ScoreKey};
use anastomosis_core::synth::{
    generate_corpus, generate_scene, RandomSpecOptions, SceneSpec, SynthScene, SYNTH_RATER,
    SYNTH_TRIAL,
};
use anyhow::{Context, Result};

use crate::fsio::{self, write_atomic};
use crate::{CliError, Status, SynthArgs};

pub const SCORES_FILE: &str = "scores.csv";
pub const PLANTED_FILE: &str = "planted.toml";
/// Ground-truth error reports go here, one `<image>.json` per scene, so the
/// output directory itself holds only annotation documents.
pub const TRUTH_DIR: &str = "truth";

pub fn load_spec(path: &Path) -> Result<SceneSpec> {
    let text = fsio::read_to_string(path, "scene spec")?;
    let spec = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(anyhow::Error::from)
    } else {
        toml::from_str(&text).map_err(anyhow::Error::from)
    };
    spec.with_context(|| format!("invalid scene spec {}", path.display()))
}

fn write_scene(out: &Path, s: &SynthScene) -> Result<()> {
    let stem = fsio::file_stem(&s.annotations.image_id);
    write_atomic(
        &out.join(format!("{stem}.json")),
        (s.annotations.to_json() + "\n").as_bytes(),
    )?;
    let truth = serde_json::to_string_pretty(&s.truth)? + "\n";
    write_atomic(
        &out.join(TRUTH_DIR).join(format!("{stem}.json")),
        truth.as_bytes(),
    )?;
    Ok(())
}

pub fn run(args: &SynthArgs) -> Result<Status, CliError> {
    let spec = match &args.spec {
        Some(p) => load_spec(p)?,
        None => SceneSpec::default(),
    };
    fsio::create_dir(&args.out.join(TRUTH_DIR))?;

    let (scenes, scores) = match args.count {
        None => {
            let s = generate_scene(&spec, args.seed).context("generating scene")?;
            let mut scores = RaterScoreTable::new();
            scores.insert(
                ScoreKey::new(&s.annotations.image_id, SYNTH_RATER, SYNTH_TRIAL),
                s.truth.counts(),
            );
            (vec![s], scores)
        }
        Some(count) => {
            let options = RandomSpecOptions {
                max_per_type: args.max_injections,
                extra_stitches: args.extra_stitches,
            };
            let c =
                generate_corpus(&spec, count, &options, args.seed).context("generating corpus")?;
            (c.scenes, c.scores)
        }
    };
    for s in &scenes {
        write_scene(&args.out, s)?;
    }
    write_atomic(&args.out.join(SCORES_FILE), scores.to_csv().as_bytes())?;
    write_atomic(
        &args.out.join(PLANTED_FILE),
        spec.thresholds.to_toml_string().as_bytes(),
    )?;
    eprintln!("wrote {} scene(s) to {}", scenes.len(), args.out.display());
    Ok(Status::Success)
}
