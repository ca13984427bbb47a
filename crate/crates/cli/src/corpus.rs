//! File naming conventions of a corpus directory.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use formbench_core::doc_model::to_canonical_json;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::UsageError;

pub const GT_SUFFIX: &str = ".gt.json";
pub const SCHEMA_SUFFIX: &str = ".schema.json";
pub const MANIFEST_SUFFIX: &str = ".manifest.json";

/// Fail with a usage error when a path named on the command line is missing.
pub fn require(path: &Path) -> anyhow::Result<&Path> {
    if path.exists() {
        Ok(path)
    } else {
        Err(UsageError(format!("{} does not exist", path.display())).into())
    }
}

pub fn require_dir(path: &Path) -> anyhow::Result<&Path> {
    if path.is_dir() {
        Ok(path)
    } else {
        Err(UsageError(format!("{} is not a directory", path.display())).into())
    }
}

pub fn read_bytes(path: &Path) -> anyhow::Result<Vec<u8>> {
    fs::read(require(path)?).with_context(|| format!("reading {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Canonical JSON (sorted keys, fixed number format) with a final newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut bytes = to_canonical_json(value);
    if bytes.last() != Some(&b'\n') {
        bytes.push(b'\n');
    }
    write_bytes(path, &bytes)
}

/// Pretty JSON in source key order, for schemas meant to be read by people.
pub fn write_pretty<T: Serialize + ?Sized>(path: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    match path {
        Some(p) => write_bytes(p, &bytes),
        None => {
            use std::io::Write;
            std::io::stdout().write_all(&bytes)?;
            Ok(())
        }
    }
}

/// File name of `path` with `suffix` removed, when it ends that way.
pub fn id_with_suffix(path: &Path, suffix: &str) -> Option<String> {
    let name = path.file_name()?.to_str()?;
    name.strip_suffix(suffix).filter(|s| !s.is_empty()).map(str::to_string)
}

/// Document id for a ground-truth file: `a.gt.json` and `a.json` both give `a`.
pub fn gt_doc_id(path: &Path) -> Option<String> {
    id_with_suffix(path, GT_SUFFIX).or_else(|| id_with_suffix(path, ".json"))
}

/// `(doc_id, path)` for every file in `dir` ending in `suffix`, sorted by id.
pub fn list(dir: &Path, suffix: &str) -> anyhow::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(require_dir(dir)?).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if let Some(id) = id_with_suffix(&path, suffix) {
            out.push((id, path));
        }
    }
    out.sort();
    Ok(out)
}
