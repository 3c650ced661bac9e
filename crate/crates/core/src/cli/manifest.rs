//! Run manifests, output writing and reproduction bundles.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::Result;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub pass: u64,
    pub fail: u64,
    pub inconclusive: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
}

/// Everything needed to rerun a command. Only `started_at` and
/// `finished_at` vary between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub subcommand: String,
    pub params: Value,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub started_at: u64,
    pub finished_at: u64,
    pub counts: VerdictCounts,
    pub exit_code: i32,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(subcommand: &str, params: Value, seed: u64) -> Self {
        let mut versions = BTreeMap::new();
        versions.insert("corrbench".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("schema".to_string(), MANIFEST_SCHEMA_VERSION.to_string());
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            subcommand: subcommand.to_string(),
            params,
            seed,
            versions,
            started_at: unix_now(),
            finished_at: 0,
            counts: VerdictCounts::default(),
            exit_code: 0,
            outputs: Vec::new(),
        }
    }

    /// The manifest with timestamps zeroed, for reproducibility comparisons.
    pub fn without_timestamps(&self) -> Self {
        Self { started_at: 0, finished_at: 0, ..self.clone() }
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Where a command's main output goes.
#[derive(Debug, Clone)]
pub struct Sink {
    pub path: Option<PathBuf>,
}

impl Sink {
    /// Writes `bytes` to the file, or to stdout; returns the digest entry
    /// for file outputs.
    pub fn write(&self, bytes: &[u8]) -> Result<Option<OutputDigest>> {
        match &self.path {
            Some(p) => {
                std::fs::write(p, bytes)?;
                Ok(Some(OutputDigest { path: p.display().to_string(), sha256: sha256_hex(bytes) }))
            }
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(bytes)?;
                out.flush()?;
                Ok(None)
            }
        }
    }

    /// Sibling file `<out>.<suffix>`, or `corrbench-<subcommand>.<suffix>`
    /// in the working directory without `--out`.
    pub fn sibling(&self, subcommand: &str, suffix: &str) -> PathBuf {
        match &self.path {
            Some(p) => {
                let mut s = p.clone().into_os_string();
                s.push(format!(".{suffix}"));
                PathBuf::from(s)
            }
            None => PathBuf::from(format!("corrbench-{subcommand}.{suffix}")),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// Writes a reproduction bundle: the manifest plus the failing items.
pub fn write_repro(path: &Path, manifest: &RunManifest, failures: Value) -> Result<()> {
    let bundle = serde_json::json!({ "manifest": manifest, "failures": failures });
    std::fs::write(path, to_json_bytes(&bundle)?)?;
    Ok(())
}
