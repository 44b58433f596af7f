//! Artifact writers: CSV tables and JSON records, each stamped with the
//! config hash for provenance. Floats are written with 17 significant
//! digits so re-reading reproduces the exact binary value, and the same
//! config always produces byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use sha2::{Digest, Sha256};

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Hash of the raw config bytes plus any seed override; recorded in every
/// artifact so results can be traced back to their exact inputs.
pub fn config_hash(config_bytes: &[u8], seed_override: Option<u64>) -> String {
    let mut h = Sha256::new();
    h.update(config_bytes);
    if let Some(s) = seed_override {
        h.update(b"seed-override");
        h.update(s.to_le_bytes());
    }
    hex::encode(&h.finalize()[..16])
}

pub struct ArtifactSink {
    dir: PathBuf,
    prefix: String,
    hash: String,
    /// Paths written this run, echoed to the user at the end.
    pub written: Vec<PathBuf>,
}

impl ArtifactSink {
    pub fn new(dir: &str, prefix: &str, hash: String) -> anyhow::Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {dir}"))?;
        Ok(Self {
            dir: PathBuf::from(dir),
            prefix: prefix.to_string(),
            hash,
            written: Vec::new(),
        })
    }

    fn path(&self, task: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{}_{task}.{ext}", self.prefix))
    }

    /// CSV with a comment header carrying the config hash, then a column
    /// header row, then the data rows (already formatted).
    pub fn write_csv(
        &mut self,
        task: &str,
        columns: &[&str],
        rows: &[Vec<String>],
    ) -> anyhow::Result<PathBuf> {
        let mut out = format!("# config_hash = {}\n{}\n", self.hash, columns.join(","));
        for row in rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        let path = self.path(task, "csv");
        fs::write(&path, out).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }

    /// Pretty JSON with the config hash injected at the top level.
    pub fn write_json(
        &mut self,
        task: &str,
        mut value: serde_json::Value,
    ) -> anyhow::Result<PathBuf> {
        if let serde_json::Value::Object(map) = &mut value {
            map.insert(
                "config_hash".to_string(),
                serde_json::Value::String(self.hash.clone()),
            );
        }
        let path = self.path(task, "json");
        let mut body = serde_json::to_string_pretty(&value)?;
        body.push('\n');
        fs::write(&path, body)
            .with_context(|| format!("writing {}", path.display()))?;
        self.written.push(path.clone());
        Ok(path)
    }
}

/// Read a config file, returning (raw bytes, parsed value).
pub fn load_config(path: &Path) -> anyhow::Result<(Vec<u8>, crate::config::ExperimentConfig)> {
    let bytes = fs::read(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg = serde_json::from_slice(&bytes)
        .with_context(|| format!("parsing config {}", path.display()))?;
    Ok((bytes, cfg))
}
