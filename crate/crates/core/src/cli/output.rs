use super::config::RunConfig;
use crate::error::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST_SCHEMA: &str = "v1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

/// CSV files written under one output directory.
#[derive(Debug)]
pub struct Outputs {
    root: PathBuf,
    pub files: Vec<OutputFile>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Outputs {
    pub fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `rows` with a header taken from the field names.
    pub fn csv<S: Serialize>(&mut self, name: &str, rows: &[S]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        let path = self.root.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(&path, &bytes)?;
        self.files.push(OutputFile {
            path: name.to_string(),
            sha256: sha256_hex(&bytes),
            rows: rows.len(),
        });
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: String,
    pub config: RunConfig,
    /// SHA-256 of the JSON encoding of `(subcommand, config)`, leaving out
    /// the output directory and thread cap.
    pub config_sha256: String,
    pub outputs: Vec<OutputFile>,
    pub constants: serde_json::Value,
    pub verdicts: BTreeMap<String, bool>,
    pub details: serde_json::Value,
    pub exit_code: i32,
    pub elapsed_seconds: f64,
}

impl Manifest {
    pub fn new(subcommand: &str, config: &RunConfig) -> Self {
        let hashed = RunConfig {
            out: None,
            threads: None,
            ..config.clone()
        };
        let key = serde_json::to_string(&(subcommand, &hashed)).expect("config serializes");
        Self {
            schema: MANIFEST_SCHEMA,
            tool: "mtower",
            version: env!("CARGO_PKG_VERSION"),
            subcommand: subcommand.to_string(),
            config: config.clone(),
            config_sha256: sha256_hex(key.as_bytes()),
            outputs: Vec::new(),
            constants: serde_json::Value::Null,
            verdicts: BTreeMap::new(),
            details: serde_json::Value::Null,
            exit_code: 0,
            elapsed_seconds: 0.0,
        }
    }

    /// Replaces the recorded config (after defaults are filled in).
    pub fn set_config(&mut self, config: &RunConfig) {
        let fresh = Self::new(&self.subcommand, config);
        self.config = fresh.config;
        self.config_sha256 = fresh.config_sha256;
    }

    pub fn verdict(&mut self, name: &str, pass: bool) {
        self.verdicts.insert(name.to_string(), pass);
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|&v| v)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}

pub fn to_json<T: Serialize>(v: &T) -> serde_json::Value {
    serde_json::to_value(v).unwrap_or(serde_json::Value::Null)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        n: usize,
        x: f64,
        y: Option<f64>,
        ok: bool,
    }

    #[test]
    fn csv_with_header_and_hash() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = Outputs::new(dir.path()).unwrap();
        out.csv("sub/t.csv", &[Row { n: 1, x: 0.5, y: None, ok: true }]).unwrap();
        let text = std::fs::read_to_string(dir.path().join("sub/t.csv")).unwrap();
        assert_eq!(text, "n,x,y,ok\n1,0.5,,true\n");
        assert_eq!(out.files[0].sha256, sha256_hex(text.as_bytes()));
    }
}
