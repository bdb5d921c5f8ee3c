//! Output-path policy, image-set loading and report metadata.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spai_core::corpus::{Manifest, PixelTensor};

/// Bad invocation detected after argument parsing; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Marks directories this tool created, so `--force` never clears anything
/// else.
const MARKER: &str = ".spai-output";

/// Creates an output directory. An existing non-empty one is an error
/// unless `force` is set and the directory was written by this tool, in
/// which case it is cleared first.
pub fn fresh_dir(path: &Path, force: bool) -> anyhow::Result<()> {
    let occupied = path.exists() && std::fs::read_dir(path).map(|mut d| d.next().is_some()).unwrap_or(true);
    if occupied {
        if !force {
            bail!("{} already exists; pass --force to replace it", path.display());
        }
        if !path.join(MARKER).is_file() {
            bail!("{} was not created by spai; refusing to replace it", path.display());
        }
        std::fs::remove_dir_all(path).with_context(|| format!("clearing {}", path.display()))?;
    }
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))?;
    std::fs::write(path.join(MARKER), "").with_context(|| format!("marking {}", path.display()))?;
    Ok(())
}

/// An existing output file needs `force`.
pub fn fresh_file(path: &Path, force: bool) -> anyhow::Result<()> {
    if path.exists() && !force {
        bail!("{} already exists; pass --force to overwrite it", path.display());
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    Ok(())
}

pub fn write_text(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

const IMAGE_EXTENSIONS: [&str; 8] = ["png", "bmp", "jpg", "jpeg", "tif", "tiff", "pgm", "ppm"];

/// `(id, image)` pairs. A manifest is read in record order; a directory is
/// walked in file-name order with ids relative to it, and files without an
/// image extension are ignored. Labels play no part here.
pub fn load_image_set(path: &Path) -> anyhow::Result<Vec<(String, PixelTensor)>> {
    if !path.is_dir() {
        let manifest = Manifest::load(path).with_context(|| format!("loading manifest {}", path.display()))?;
        return manifest.records.iter().map(|r| Ok((r.id.clone(), PixelTensor::load(&r.path)?))).collect();
    }
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.with_context(|| format!("scanning {}", path.display()))?;
        let ext = entry.path().extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if !entry.file_type().is_file() || !ext.is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.as_str())) {
            continue;
        }
        let rel = entry.path().strip_prefix(path).expect("walk stays below its root");
        let id = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        let img = PixelTensor::load(entry.path()).with_context(|| format!("decoding {}", entry.path().display()))?;
        out.push((id, img));
    }
    Ok(out)
}

/// Provenance block embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub tool_version: String,
    pub command: String,
    /// SHA-256 of the canonical JSON of `inputs`.
    pub config_hash: String,
    pub inputs: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
}

impl ReportMeta {
    pub fn new(command: &str, inputs: serde_json::Value, seeds: &[(&str, u64)]) -> Self {
        let config_hash = hex::encode(Sha256::digest(serde_json::to_vec(&inputs).expect("json value serializes")));
        Self {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash,
            inputs,
            seeds: seeds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }
}
