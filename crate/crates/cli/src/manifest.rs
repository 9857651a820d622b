//! Run manifests: what a command read, how it was configured and what it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use qcert_core::config::SCHEMA_VERSION;
use qcert_core::report::sha256_hex;
use qcert_core::Result;
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileDigest { path: path.display().to_string(), sha256: sha256_hex(&fs::read(path)?) })
    }
}

/// Everything that determines a command's outputs. Its hash is written into
/// each JSON output, so the outputs can be traced back to this record.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestCore {
    pub schema_version: u32,
    pub command: String,
    pub toolkit_version: String,
    pub config_path: Option<String>,
    pub seed: Option<u64>,
    pub options: BTreeMap<String, String>,
    pub inputs: Vec<FileDigest>,
    /// Hash over the input contents in order, or over the effective
    /// configuration when no input file was read.
    pub input_sha256: String,
}

impl ManifestCore {
    pub fn new(command: &str) -> Self {
        ManifestCore {
            schema_version: SCHEMA_VERSION,
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config_path: None,
            seed: None,
            options: BTreeMap::new(),
            inputs: Vec::new(),
            input_sha256: String::new(),
        }
    }

    pub fn option(mut self, key: &str, value: impl ToString) -> Self {
        self.options.insert(key.to_string(), value.to_string());
        self
    }

    pub fn hash(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("manifest serialises"))
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    #[serde(flatten)]
    pub core: &'a ManifestCore,
    pub manifest_sha256: String,
    pub outputs: Vec<FileDigest>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub created_unix: Option<u64>,
}

/// `report.json` → `report.manifest.json`.
pub fn manifest_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    output.with_file_name(format!("{stem}.manifest.json"))
}

pub fn write_manifest(core: &ManifestCore, outputs: &[&Path], primary: &Path, timestamp: bool) -> Result<PathBuf> {
    let manifest = RunManifest {
        core,
        manifest_sha256: core.hash(),
        outputs: outputs.iter().map(|p| FileDigest::of(p)).collect::<Result<_>>()?,
        created_unix: timestamp
            .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)),
    };
    let path = manifest_path(primary);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_path_replaces_extension() {
        assert_eq!(manifest_path(Path::new("out/report.json")), PathBuf::from("out/report.manifest.json"));
        assert_eq!(manifest_path(Path::new("counts.csv")), PathBuf::from("counts.manifest.json"));
    }

    #[test]
    fn hash_ignores_nothing_but_changes_with_options() {
        let a = ManifestCore::new("certify").option("space", "X");
        let b = ManifestCore::new("certify").option("space", "K");
        assert_eq!(a.hash(), a.clone().hash());
        assert_ne!(a.hash(), b.hash());
    }
}
