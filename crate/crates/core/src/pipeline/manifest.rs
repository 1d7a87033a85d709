use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    #[serde(rename = "complete")]
    Complete,
    #[serde(rename = "FAILED")]
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub run_id: String,
    pub alpha: f64,
    pub status: RunStatus,
}

/// Index of everything a pipeline run wrote.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: RunStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub files: Vec<FileEntry>,
    pub runs: Vec<RunEntry>,
}

impl Manifest {
    pub fn load(output_dir: &Path) -> Result<Self> {
        let path = output_dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    pub fn file(&self, run_id: Option<&str>, kind: &str) -> Option<&FileEntry> {
        self.files
            .iter()
            .find(|f| f.kind == kind && f.run_id.as_deref() == run_id)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub(crate) struct ManifestWriter {
    root: PathBuf,
    files: Vec<FileEntry>,
    runs: Vec<RunEntry>,
}

impl ManifestWriter {
    pub(crate) fn new(root: &Path) -> Self {
        ManifestWriter {
            root: root.to_path_buf(),
            files: Vec::new(),
            runs: Vec::new(),
        }
    }

    pub(crate) fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Hashes an already written file and appends it to the index.
    pub(crate) fn record(&mut self, rel: &str, kind: &str, run_id: Option<&str>) -> Result<()> {
        let path = self.path(rel);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        self.files.push(FileEntry {
            path: rel.to_string(),
            kind: kind.to_string(),
            run_id: run_id.map(str::to_string),
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub(crate) fn begin_run(&mut self, run_id: &str, alpha: f64) {
        self.runs.push(RunEntry {
            run_id: run_id.to_string(),
            alpha,
            status: RunStatus::Failed,
        });
    }

    pub(crate) fn complete_run(&mut self, run_id: &str) {
        if let Some(r) = self.runs.iter_mut().find(|r| r.run_id == run_id) {
            r.status = RunStatus::Complete;
        }
    }

    /// Writes `manifest.json`; `failure` is `(stage, message)`.
    pub(crate) fn finish(self, failure: Option<(String, String)>) -> Result<Manifest> {
        let (status, failed_stage, error) = match failure {
            None => (RunStatus::Complete, None, None),
            Some((stage, msg)) => (RunStatus::Failed, Some(stage), Some(msg)),
        };
        let manifest = Manifest {
            status,
            failed_stage,
            error,
            files: self.files,
            runs: self.runs,
        };
        let path = self.root.join(MANIFEST_FILE);
        let json =
            serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
        fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn failed_manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.txt"), "x").unwrap();
        let mut w = ManifestWriter::new(dir.path());
        w.record("a.txt", "vocab", None).unwrap();
        w.begin_run("alpha_0", 0.0);
        let m = w
            .finish(Some(("train:alpha_0".into(), "boom".into())))
            .unwrap();
        assert_eq!(m.status, RunStatus::Failed);
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        assert!(text.contains("\"FAILED\""));
        assert_eq!(Manifest::load(dir.path()).unwrap(), m);
        assert_eq!(m.runs[0].status, RunStatus::Failed);
    }
}
