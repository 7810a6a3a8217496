//! Output staging and run manifests.
//!
//! Every command collects its files in memory, then writes them in one go
//! after checking that nothing would be overwritten without `--force`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub struct Outputs {
    dir: PathBuf,
    files: Vec<(String, Vec<u8>)>,
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    /// sha256 over the config echo and every output digest.
    hash: String,
    notes: &'a [String],
    outputs: BTreeMap<&'a str, String>,
    config: &'a C,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Outputs {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), files: Vec::new() }
    }

    pub fn add(&mut self, name: impl Into<String>, bytes: impl Into<Vec<u8>>) {
        self.files.push((name.into(), bytes.into()));
    }

    /// Adds `manifest.toml` echoing `config`, then writes everything.
    pub fn finish<C: Serialize>(mut self, command: &str, seed: u64, config: &C, notes: &[String], force: bool) -> Result<PathBuf, CliError> {
        let echo = toml::to_string(config).map_err(|e| CliError::Config(format!("cannot echo config: {e}")))?;
        let outputs: BTreeMap<&str, String> = self.files.iter().map(|(n, b)| (n.as_str(), sha256_hex(b))).collect();
        let mut h = Sha256::new();
        h.update(echo.as_bytes());
        for (n, d) in &outputs {
            h.update(n.as_bytes());
            h.update(d.as_bytes());
        }
        let manifest = Manifest {
            schema_version: crate::config::SCHEMA_VERSION,
            tool: "irlv",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            hash: hex::encode(h.finalize()),
            notes,
            outputs,
            config,
        };
        let text = toml::to_string(&manifest).map_err(|e| CliError::Config(format!("cannot write manifest: {e}")))?;
        self.files.push(("manifest.toml".into(), text.into_bytes()));
        self.write(force)?;
        Ok(self.dir.join("manifest.toml"))
    }

    fn write(&self, force: bool) -> Result<(), CliError> {
        if !force {
            if let Some((n, _)) = self.files.iter().find(|(n, _)| self.dir.join(n).exists()) {
                return Err(CliError::Exists(self.dir.join(n)));
            }
        }
        fs::create_dir_all(&self.dir).map_err(|e| CliError::File(self.dir.clone(), e))?;
        for (n, b) in &self.files {
            let p = self.dir.join(n);
            fs::write(&p, b).map_err(|e| CliError::File(p, e))?;
        }
        Ok(())
    }
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::File(path.to_path_buf(), e))
}
