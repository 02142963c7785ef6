//! Atomic file emission: everything is written to a temp file in the target
//! directory and renamed into place, so a failed run never leaves partial
//! output files behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents.as_bytes())
        .context("writing output contents")?;
    let target = dir.join(name);
    tmp.persist(&target)
        .with_context(|| format!("renaming into {}", target.display()))?;
    Ok(target)
}
