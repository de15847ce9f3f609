//! Output directory bookkeeping and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;

/// Writes files under one root, each atomically, and remembers their
/// hashes for the manifest.
pub struct Outputs {
    root: PathBuf,
    hashes: BTreeMap<String, String>,
    stages: Vec<StageTime>,
}

#[derive(Clone, Debug, Serialize)]
pub struct StageTime {
    pub stage: String,
    pub wall_seconds: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool: &'static str,
    version: &'static str,
    jobs: usize,
    config: &'a PipelineConfig,
    stages: &'a [StageTime],
    outputs: &'a BTreeMap<String, String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes through a sibling temporary file and a rename, so readers never
/// see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    {
        let mut f = fs::File::create(&tmp).with_context(|| format!("cannot write {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).with_context(|| format!("cannot move {} into place", path.display()))?;
    Ok(())
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

impl Outputs {
    pub fn new(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root: root.to_path_buf(),
            hashes: BTreeMap::new(),
            stages: Vec::new(),
        })
    }

    /// Writes `bytes` to `rel` (a `/`-separated path under the root).
    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = self.root.join(rel);
        write_atomic(&path, bytes)?;
        self.hashes.insert(rel.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, rel: &str, value: &T) -> anyhow::Result<PathBuf> {
        self.write(rel, &json_bytes(value)?)
    }

    /// Runs `f` and records its wall time under `stage`.
    pub fn timed<R>(&mut self, stage: &str, f: impl FnOnce(&mut Self) -> R) -> R {
        let t = Instant::now();
        let r = f(self);
        self.stages.push(StageTime {
            stage: stage.to_string(),
            wall_seconds: t.elapsed().as_secs_f64(),
        });
        r
    }

    /// Writes `manifest-<command>.json` next to the outputs.
    pub fn write_manifest(&self, command: &str, cfg: &PipelineConfig) -> anyhow::Result<PathBuf> {
        let m = Manifest {
            command,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            jobs: cfg.jobs,
            config: cfg,
            stages: &self.stages,
            outputs: &self.hashes,
        };
        let path = self.root.join(format!("manifest-{command}.json"));
        write_atomic(&path, &json_bytes(&m)?)?;
        Ok(path)
    }
}

/// CSV document built in memory.
pub fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("{e}"))
}

/// File-name-safe form of a subject id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_known_input() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_leaves_no_temporary() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path()).unwrap();
        out.write("a/b.txt", b"hi").unwrap();
        assert_eq!(fs::read(dir.path().join("a/b.txt")).unwrap(), b"hi");
        assert_eq!(fs::read_dir(dir.path().join("a")).unwrap().count(), 1);
        assert_eq!(out.hashes.len(), 1);
    }

    #[test]
    fn subject_ids_become_safe_stems() {
        assert_eq!(file_stem("S0001"), "S0001");
        assert_eq!(file_stem("a/b c"), "a_b_c");
    }
}
