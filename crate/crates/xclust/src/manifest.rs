//! `manifest.json`: what a command read, how it was invoked and what it wrote.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path, recorded_as: PathBuf) -> Result<Self> {
        let file = File::open(path).with_context(|| format!("hashing {}", path.display()))?;
        let mut reader = BufReader::new(file);
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 16];
        let mut bytes = 0u64;
        loop {
            let n = reader.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            bytes += n as u64;
        }
        Ok(Self {
            path: recorded_as,
            bytes,
            sha256: format!("{:x}", hasher.finalize()),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    pub out_dir: PathBuf,
    /// Absolute input paths with digests.
    pub inputs: Vec<FileDigest>,
    pub parameters: serde_json::Value,
    /// Output paths relative to `out_dir`.
    pub outputs: Vec<FileDigest>,
    pub warnings: Vec<String>,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Outputs whose digest differs from `other`'s, or that only one side has.
    pub fn output_mismatches(&self, other: &RunManifest) -> Vec<PathBuf> {
        let mut bad = Vec::new();
        for o in &self.outputs {
            if other.outputs.iter().find(|x| x.path == o.path) != Some(o) {
                bad.push(o.path.clone());
            }
        }
        for o in &other.outputs {
            if !self.outputs.iter().any(|x| x.path == o.path) {
                bad.push(o.path.clone());
            }
        }
        bad
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x");
        std::fs::write(&p, b"abc").unwrap();
        let d = FileDigest::of(&p, "x".into()).unwrap();
        assert_eq!(d.bytes, 3);
        assert_eq!(
            d.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
