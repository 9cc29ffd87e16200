//! Output plumbing shared by all subcommands: the metadata block every file
//! embeds, atomic writes, and content hashing.
//!
//! Nothing written here may contain an absolute path or a timestamp —
//! repeated runs with the same seed must produce byte-identical files even
//! from different working directories.

use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Provenance block embedded in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
}

impl RunMeta {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            tool: "whisperkit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash,
            seed,
        }
    }

    /// Leading line for JSONL outputs: `{"meta": {...}}`.
    pub fn jsonl_line(&self) -> String {
        format!("{{\"meta\":{}}}", serde_json::to_string(self).unwrap())
    }

    /// Leading comment lines for CSV outputs.
    pub fn csv_comment(&self) -> String {
        format!(
            "# whisperkit version={} config_hash={} seed={}\n",
            self.version, self.config_hash, self.seed
        )
    }
}

/// Write bytes to `path` atomically (same-directory temp file + rename).
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
    }
    let tmp = path.with_extension(match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => format!("{ext}.tmp"),
        None => "tmp".to_string(),
    });
    std::fs::write(&tmp, bytes).with_context(|| format!("writing {}", tmp.display()))?;
    std::fs::rename(&tmp, path)
        .with_context(|| format!("renaming {} into place", tmp.display()))?;
    Ok(())
}

/// Hex SHA-256 of a byte slice.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Hex SHA-256 of a file's contents.
pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn meta_line_parses_back() {
        let meta = RunMeta::new("abc123".into(), 7);
        let line = meta.jsonl_line();
        let value: serde_json::Value = serde_json::from_str(&line).unwrap();
        assert_eq!(value["meta"]["seed"], 7);
        assert_eq!(value["meta"]["config_hash"], "abc123");
    }

    #[test]
    fn atomic_write_creates_parents_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/dir/out.json");
        write_atomic(&path, b"{}").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"{}");
        let names: Vec<_> = std::fs::read_dir(path.parent().unwrap())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }

    #[test]
    fn sha256_is_stable() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
