//! File helpers shared by the commands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anastomosis_core::interchange::Parsed;
use anastomosis_core::{parse_annotation_file, AnnotationSet};
use anyhow::{bail, Context, Result};

/// Writes through a temporary file in the same directory, then renames, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating a file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))
}

/// `*.json` files directly inside `dir`, sorted by name.
pub fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in
        fs::read_dir(dir).with_context(|| format!("reading directory {}", dir.display()))?
    {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Expands directories to their `*.json` files; files are kept in the
/// order given.
pub fn expand_inputs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if p.is_dir() {
            out.extend(json_files(p)?);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no annotation files found");
    }
    Ok(out)
}

pub fn read_annotation(path: &Path) -> Result<Parsed<AnnotationSet>> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_annotation_file(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn read_to_string(path: &Path, what: &str) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {what} {}", path.display()))
}

/// Image id made safe for use as a file name.
pub fn file_stem(image_id: &str) -> String {
    image_id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

pub fn warn_all(context: &str, warnings: &[String]) {
    for w in warnings {
        eprintln!("warning: {context}: {w}");
    }
}
