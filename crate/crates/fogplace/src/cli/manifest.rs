//! Run manifests: a reproducibility record written next to every command
//! output (config hash, seed, input digests, schema versions, timestamp).

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::rng::fnv1a;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    /// FNV-1a hash of the canonical resolved configuration.
    pub config_hash: String,
    pub seed: u64,
    /// FNV-1a digest per input file.
    pub input_digests: BTreeMap<String, String>,
    /// Schema versions of every serialized artifact format.
    pub artifact_versions: BTreeMap<String, u32>,
    pub created_unix_ms: u128,
}

/// Schema versions of all wire formats, also served by `--version`.
pub fn artifact_versions() -> BTreeMap<String, u32> {
    let mut v = BTreeMap::new();
    v.insert("topology".into(), crate::topology::TOPOLOGY_SCHEMA_VERSION);
    v.insert(
        "arima-model".into(),
        crate::forecast::arima::ARIMA_SCHEMA_VERSION,
    );
    v.insert(
        "lstm-model".into(),
        crate::forecast::lstm::LSTM_SCHEMA_VERSION,
    );
    v.insert(
        "placement".into(),
        crate::placement::PLACEMENT_SCHEMA_VERSION,
    );
    v.insert("manifest".into(), MANIFEST_SCHEMA_VERSION);
    v
}

impl RunManifest {
    /// Build a manifest from the resolved configuration string (any stable
    /// canonical rendering) and the list of input files.
    pub fn new(command: &str, canonical_config: &str, seed: u64, inputs: &[&Path]) -> Result<Self> {
        let mut input_digests = BTreeMap::new();
        for path in inputs {
            let bytes = std::fs::read(path)?;
            input_digests.insert(
                path.display().to_string(),
                format!("fnv1a64:{:016x}", fnv1a(&bytes)),
            );
        }
        Ok(RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_string(),
            config_hash: format!("fnv1a64:{:016x}", fnv1a(canonical_config.as_bytes())),
            seed,
            input_digests,
            artifact_versions: artifact_versions(),
            created_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis())
                .unwrap_or(0),
        })
    }

    /// Write `<out>.manifest.json` next to an output file.
    pub fn write_for(&self, out_path: &Path) -> Result<()> {
        let mut manifest_path = out_path.as_os_str().to_owned();
        manifest_path.push(".manifest.json");
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(manifest_path, text + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_digests_inputs() {
        let dir = std::env::temp_dir().join("fogplace-manifest-test");
        std::fs::create_dir_all(&dir).unwrap();
        let input = dir.join("in.csv");
        std::fs::write(&input, "a,b\n1,2\n").unwrap();
        let m = RunManifest::new("test", "k=v", 7, &[&input]).unwrap();
        assert_eq!(m.seed, 7);
        assert!(m.input_digests[&input.display().to_string()].starts_with("fnv1a64:"));
        let out = dir.join("out.json");
        std::fs::write(&out, "{}").unwrap();
        m.write_for(&out).unwrap();
        assert!(dir.join("out.json.manifest.json").exists());
    }
}
