//! Output directories with atomically written files and a run manifest.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunFailure {
    pub stage: String,
    pub category: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit: String,
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub files: Vec<FileDigest>,
    pub failures: Vec<RunFailure>,
}

impl RunManifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            what: "manifest",
            detail: e.to_string(),
        })
    }

    /// Recomputes every listed digest and compares it with the file on disk.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        for f in &self.files {
            let path = dir.join(&f.path);
            let bytes = std::fs::read(&path).map_err(|e| Error::io(&path, e))?;
            if sha256_hex(&bytes) != f.sha256 || bytes.len() as u64 != f.bytes {
                return Err(Error::Format {
                    what: "manifest",
                    detail: format!("digest mismatch for {}", f.path),
                });
            }
        }
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

/// Collects the files of one run and finishes with its manifest.
#[derive(Debug)]
pub struct OutputDir {
    dir: PathBuf,
    command: String,
    config: serde_json::Value,
    seeds: Vec<u64>,
    started: f64,
    files: Vec<FileDigest>,
    failures: Vec<RunFailure>,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &str, config: &impl Serialize) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let config = serde_json::to_value(config).map_err(|e| Error::Format {
            what: "config snapshot",
            detail: e.to_string(),
        })?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config,
            seeds: Vec::new(),
            started: unix_now(),
            files: Vec::new(),
            failures: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn add_seeds(&mut self, seeds: impl IntoIterator<Item = u64>) {
        for s in seeds {
            if !self.seeds.contains(&s) {
                self.seeds.push(s);
            }
        }
    }

    pub fn record_failure(&mut self, stage: impl Into<String>, err: &Error) {
        self.record(stage, err.category(), err.to_string());
    }

    pub fn record(&mut self, stage: impl Into<String>, category: &str, message: String) {
        self.failures.push(RunFailure {
            stage: stage.into(),
            category: category.to_string(),
            message,
        });
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(rel);
        write_atomic(&path, bytes)?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileDigest {
            path: rel.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn files(&self) -> &[FileDigest] {
        &self.files
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(self) -> Result<RunManifest> {
        let manifest = RunManifest {
            toolkit: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            config: self.config,
            seeds: self.seeds,
            started_unix: self.started,
            finished_unix: unix_now(),
            files: self.files,
            failures: self.failures,
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format {
            what: "manifest",
            detail: e.to_string(),
        })?;
        text.push('\n');
        write_atomic(&self.dir.join(MANIFEST_FILE), text.as_bytes())?;
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
    fn manifest_round_trip_and_verify() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path(), "test", &serde_json::json!({"a": 1})).unwrap();
        out.add_seeds([3, 1, 3]);
        out.write("x.csv", b"h\n1\n").unwrap();
        out.write("sub/y.csv", b"h\n").unwrap();
        out.write("x.csv", b"h\n2\n").unwrap();
        let m = out.finish().unwrap();
        assert_eq!(m.seeds, vec![3, 1]);
        assert_eq!(m.files.len(), 2);
        let back = RunManifest::read(tmp.path()).unwrap();
        assert_eq!(back, m);
        back.verify(tmp.path()).unwrap();
        std::fs::write(tmp.path().join("x.csv"), b"h\n3\n").unwrap();
        assert!(back.verify(tmp.path()).is_err());
    }
}
