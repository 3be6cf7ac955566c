//! Tab-separated dataset manifest: `path<TAB>labels[<TAB>split]`.
//!
//! Labels are comma-separated subclass names. Relative paths resolve against
//! the manifest's directory. Blank lines and lines starting with `#` are
//! ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::labels::LabelVector;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub path: PathBuf,
    pub labels: LabelVector,
    pub split: Option<String>,
}

impl ManifestEntry {
    /// Clip identifier: the file stem.
    pub fn id(&self) -> String {
        self.path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

pub fn parse(text: &str, base: &Path) -> Result<Vec<ManifestEntry>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |reason: &str| Error::BadManifest {
            line: n + 1,
            reason: reason.to_string(),
        };
        let fields: Vec<&str> = line.split('\t').collect();
        if !(2..=3).contains(&fields.len()) {
            return Err(bad("expected 2 or 3 tab-separated fields"));
        }
        if fields[0].is_empty() {
            return Err(bad("empty path"));
        }
        let labels: LabelVector = fields[1].parse().map_err(|e: Error| bad(&e.to_string()))?;
        let path = Path::new(fields[0]);
        let path = if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        };
        let split = fields
            .get(2)
            .map(|s| s.trim())
            .filter(|s| !s.is_empty())
            .map(str::to_string);
        out.push(ManifestEntry {
            path,
            labels,
            split,
        });
    }
    Ok(out)
}

pub fn read(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse(&text, path.parent().unwrap_or(Path::new("")))
}

/// Paths are written relative to `base` when they live under it.
pub fn render(entries: &[ManifestEntry], base: &Path) -> String {
    let mut s = String::new();
    for e in entries {
        let p = e.path.strip_prefix(base).unwrap_or(&e.path);
        write!(s, "{}\t{}", p.display(), e.labels).unwrap();
        if let Some(split) = &e.split {
            write!(s, "\t{split}").unwrap();
        }
        s.push('\n');
    }
    s
}

pub fn write(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    fs::write(
        path,
        render(entries, path.parent().unwrap_or(Path::new(""))),
    )?;
    Ok(())
}
