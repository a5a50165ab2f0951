//! Filesystem and seeding helpers shared by the commands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Write a file atomically: stage in a temp file next to the target,
/// then rename over it. No partial file survives an error.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)
        .with_context(|| format!("creating {}", parent.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(parent)
        .with_context(|| format!("staging file in {}", parent.display()))?;
    std::io::Write::write_all(&mut tmp, bytes)?;
    tmp.persist(path)
        .with_context(|| format!("replacing {}", path.display()))?;
    Ok(())
}

/// Build a whole output directory under a staging name, then swap it
/// into place. An existing directory at the target is replaced; errors
/// during the build leave the target untouched.
pub fn stage_dir(target: &Path, build: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let parent = target.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent)?;
    let staging = tempfile::TempDir::with_prefix_in(".staging-", parent)
        .with_context(|| format!("staging directory in {}", parent.display()))?;
    build(staging.path())?;
    if target.exists() {
        fs::remove_dir_all(target)
            .with_context(|| format!("removing old {}", target.display()))?;
    }
    let staged: PathBuf = staging.keep();
    fs::rename(&staged, target)
        .with_context(|| format!("moving staged output to {}", target.display()))?;
    Ok(())
}

/// FNV-1a over a string, for mixing ids into seeds deterministically.
pub fn fnv1a(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Per-query seed derived from the run seed and the query id.
pub fn query_seed(seed: u64, query_id: &str) -> u64 {
    seed.wrapping_mul(0x9e3779b97f4a7c15) ^ fnv1a(query_id)
}
