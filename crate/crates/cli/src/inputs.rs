//! Sequence sources and content hashes of run inputs.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mts_core::synth::{generate_synth, SynthSpec};
use mts_core::{load_otb, Sequence};
use sha2::{Digest, Sha256};

/// A path names a synthetic spec (`*.toml`), one OTB sequence directory
/// (containing `img/`), or a directory of OTB sequence directories.
pub fn sequence_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_file() || path.join("img").is_dir() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        bail!("sequence_io: {} is neither a sequence nor a directory of sequences", path.display());
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(path)
        .with_context(|| format!("sequence_io: {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join("img").is_dir())
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        bail!("sequence_io: no sequences under {}", path.display());
    }
    Ok(dirs)
}

pub fn load_spec(path: &Path) -> Result<SynthSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("synth: cannot read {}", path.display()))?;
    let spec: SynthSpec = toml::from_str(&text).with_context(|| format!("synth: {}", path.display()))?;
    spec.validate()?;
    Ok(spec)
}

pub fn load_sequence(path: &Path) -> Result<Sequence> {
    if path.is_file() {
        Ok(generate_synth(&load_spec(path)?)?)
    } else {
        Ok(load_otb(path)?)
    }
}

pub fn load_sequences(path: &Path) -> Result<Vec<Sequence>> {
    sequence_dirs(path)?.iter().map(|p| load_sequence(p)).collect()
}

/// SHA-256 over a file's bytes, or over every file below a directory
/// (relative path and content, in sorted order).
pub fn hash_path(path: &Path) -> Result<String> {
    if !path.exists() {
        bail!("cli: input {} does not exist", path.display());
    }
    let mut hasher = Sha256::new();
    if path.is_file() {
        hasher.update(fs::read(path).with_context(|| format!("manifest: cannot read {}", path.display()))?);
    } else {
        let mut files = Vec::new();
        collect_files(path, &mut files)?;
        files.sort();
        for file in files {
            let rel = file.strip_prefix(path).unwrap_or(&file);
            hasher.update(rel.to_string_lossy().as_bytes());
            hasher.update([0]);
            let bytes = fs::read(&file).with_context(|| format!("manifest: cannot read {}", file.display()))?;
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(bytes);
        }
    }
    Ok(hex::encode(hasher.finalize()))
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("manifest: cannot list {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else {
            out.push(path);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_hash_tracks_names_and_content() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("img")).unwrap();
        fs::write(dir.path().join("img/a.txt"), "1").unwrap();
        fs::write(dir.path().join("b.txt"), "2").unwrap();
        let h1 = hash_path(dir.path()).unwrap();
        assert_eq!(h1, hash_path(dir.path()).unwrap());
        fs::write(dir.path().join("b.txt"), "3").unwrap();
        let h2 = hash_path(dir.path()).unwrap();
        assert_ne!(h1, h2);
        fs::rename(dir.path().join("b.txt"), dir.path().join("c.txt")).unwrap();
        assert_ne!(h2, hash_path(dir.path()).unwrap());
    }

    #[test]
    fn sequence_sets_are_sorted_and_nonempty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(sequence_dirs(dir.path()).is_err());
        for name in ["b", "a"] {
            fs::create_dir_all(dir.path().join(name).join("img")).unwrap();
        }
        fs::create_dir(dir.path().join("notes")).unwrap();
        let dirs = sequence_dirs(dir.path()).unwrap();
        assert_eq!(dirs, vec![dir.path().join("a"), dir.path().join("b")]);
        assert_eq!(sequence_dirs(&dir.path().join("a")).unwrap(), vec![dir.path().join("a")]);
    }
}
