//! Resolved run configuration and sidecar metadata.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

/// Every setting a command ran with, after defaults and environment
/// overrides were applied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    pub command: String,
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn new(command: &str) -> RunConfig {
        RunConfig { command: command.to_string(), entries: BTreeMap::new() }
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.entries.insert(key.to_string(), value.to_string());
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Canonical text: the command followed by sorted `key = value` lines.
    pub fn canonical(&self) -> String {
        let mut s = format!("command = {}\n", self.command);
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta");
    output.with_file_name(name)
}

/// Writes `<output>.meta` next to an output file.
pub fn write_sidecar(output: &Path, config: &RunConfig, profile_hash: Option<&str>) -> Result<()> {
    let mut s = String::from("# daylocus run metadata\n");
    let _ = writeln!(s, "output = {}", output.file_name().map(|n| n.to_string_lossy()).unwrap_or_default());
    let _ = writeln!(s, "config_sha256 = {}", config.hash());
    let _ = writeln!(s, "profile_sha256 = {}", profile_hash.unwrap_or("none"));
    s.push_str("[config]\n");
    s.push_str(&config.canonical());
    let path = sidecar_path(output);
    std::fs::write(&path, s).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_is_order_independent() {
        let mut a = RunConfig::new("estimate");
        a.set("b", 2).set("a", "x");
        let mut b = RunConfig::new("estimate");
        b.set("a", "x").set("b", 2);
        assert_eq!(a.canonical(), "command = estimate\na = x\nb = 2\n");
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn sha256_known_vector() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn sidecar_name() {
        assert_eq!(sidecar_path(Path::new("/t/out.png")), PathBuf::from("/t/out.png.meta"));
    }
}
