use std::fs;
use std::path::Path;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigRef {
    /// File path as given, or `builtin:reference`.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Relative to the output directory.
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command and check its outputs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name.
    pub argv: Vec<String>,
    pub config: ConfigRef,
    pub seeds: Vec<u64>,
    pub horizon: Option<String>,
    pub outputs: Vec<OutputFile>,
    pub version: String,
}

impl RunManifest {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("{} is not a run manifest", path.display()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}

/// Collects output files written into one directory.
pub struct OutputDir<'a> {
    pub root: &'a Path,
    pub written: Vec<OutputFile>,
}

impl<'a> OutputDir<'a> {
    pub fn create(root: &'a Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create {}", root.display()))?;
        Ok(OutputDir { root, written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> anyhow::Result<()> {
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("cannot create {}", parent.display()))?;
        }
        fs::write(&path, bytes).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(OutputFile { path: name.to_string(), sha256: sha256_hex(bytes) });
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_of_abc() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn manifest_round_trips() {
        let m = RunManifest {
            command: "bounds".into(),
            argv: vec!["bounds".into(), "--fold-j".into()],
            config: ConfigRef { path: "builtin:reference".into(), sha256: sha256_hex(b"x") },
            seeds: vec![0],
            horizon: None,
            outputs: vec![OutputFile { path: "bounds.txt".into(), sha256: sha256_hex(b"y") }],
            version: "0.1.0".into(),
        };
        assert_eq!(serde_json::from_str::<RunManifest>(&m.to_json()).unwrap(), m);
    }
}
