//! Per-invocation run manifest (`manifest.json`).

use std::collections::BTreeMap;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::exec;
use crate::fsutil::write_atomic;

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Versions {
    pub package: &'static str,
    pub checkpoint_format: u32,
    pub segment_cache_format: u32,
    pub parallel: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct Timings {
    pub started_unix_seconds: f64,
    pub wall_seconds: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    /// Every effective setting, defaults included.
    pub config: BTreeMap<String, serde_json::Value>,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub timings: Timings,
}

pub fn sha256_file(path: &Path) -> Result<FileDigest> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 20];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok(FileDigest {
        path: path.to_path_buf(),
        bytes: total,
        sha256: hex::encode(h.finalize()),
    })
}

fn digest_all(paths: &[PathBuf]) -> Result<Vec<FileDigest>> {
    exec::map_slice(paths, |_, p| sha256_file(p)).into_iter().collect()
}

/// Collects a manifest over the lifetime of one command.
pub struct ManifestBuilder {
    command: String,
    arguments: Vec<String>,
    config: BTreeMap<String, serde_json::Value>,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: SystemTime,
    clock: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, arguments: Vec<String>) -> Self {
        Self {
            command: command.to_string(),
            arguments,
            config: BTreeMap::new(),
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        }
    }

    pub fn config<V: Serialize>(&mut self, key: &str, value: V) -> &mut Self {
        let v = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.config.insert(key.to_string(), v);
        self
    }

    pub fn seed(&mut self, seed: u64) -> &mut Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.inputs.push(path.into());
        self
    }

    pub fn output(&mut self, path: impl Into<PathBuf>) -> &mut Self {
        self.outputs.push(path.into());
        self
    }

    pub fn finish(self) -> Result<RunManifest> {
        let mut inputs = self.inputs;
        inputs.sort();
        inputs.dedup();
        let mut outputs = self.outputs;
        outputs.sort();
        outputs.dedup();
        Ok(RunManifest {
            command: self.command,
            arguments: self.arguments,
            config: self.config,
            seed: self.seed,
            versions: Versions {
                package: env!("CARGO_PKG_VERSION"),
                checkpoint_format: crate::checkpoint::FORMAT_VERSION,
                segment_cache_format: crate::experiments::store::FORMAT_VERSION,
                parallel: exec::parallel_enabled(),
            },
            inputs: digest_all(&inputs)?,
            outputs: digest_all(&outputs)?,
            timings: Timings {
                started_unix_seconds: self
                    .started
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs_f64())
                    .unwrap_or(0.0),
                wall_seconds: self.clock.elapsed().as_secs_f64(),
            },
        })
    }

    /// Digests everything and writes the manifest to `path`.
    pub fn write(self, path: &Path) -> Result<RunManifest> {
        let m = self.finish()?;
        let json = serde_json::to_vec_pretty(&m).map_err(|e| Error::Format {
            kind: "manifest",
            reason: e.to_string(),
        })?;
        write_atomic(path, &json)?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("abc");
        std::fs::write(&p, b"abc").unwrap();
        let d = sha256_file(&p).unwrap();
        assert_eq!(d.sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        assert_eq!(d.bytes, 3);
    }

    #[test]
    fn outputs_listed_once() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        std::fs::write(&p, b"x").unwrap();
        let mut b = ManifestBuilder::new("cv", vec![]);
        b.output(&p).output(&p).seed(3);
        let m = b.finish().unwrap();
        assert_eq!(m.outputs.len(), 1);
        assert_eq!(m.seed, Some(3));
    }
}
