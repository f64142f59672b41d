//! Run manifests: what went into an artifact and how to rebuild it.
//!
//! A manifest sits next to each output as `<output>.manifest.json`. It holds
//! content hashes of inputs and outputs, the resolved settings, and the
//! argument vector that produced the run. It carries no timestamps, so two
//! identical runs produce identical manifests.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL: &str = "reasonconf";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub argv: Vec<String>,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
    pub settings: serde_json::Value,
    pub seed: u64,
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}

impl Manifest {
    pub fn new(
        command: &str,
        argv: &[String],
        inputs: &[&Path],
        outputs: &[&Path],
        settings: serde_json::Value,
        seed: u64,
    ) -> Result<Self, CliError> {
        Ok(Self {
            tool: TOOL.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            argv: argv.to_vec(),
            inputs: inputs.iter().map(|p| FileHash::of(p)).collect::<Result<_, _>>()?,
            outputs: outputs.iter().map(|p| FileHash::of(p)).collect::<Result<_, _>>()?,
            settings,
            seed,
        })
    }

    /// Writes the manifest beside every output.
    pub fn write(&self) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        for out in &self.outputs {
            let path = manifest_path(Path::new(&out.path));
            std::fs::write(&path, &text).map_err(|e| {
                CliError::Invariant(format!("cannot write {}: {e}", path.display()))
            })?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Input(format!("manifest {}: {e}", path.display())))
    }

    /// Inputs whose current content no longer matches the recorded hash.
    pub fn changed_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|h| FileHash::of(Path::new(&h.path)).map_or(true, |now| now.sha256 != h.sha256))
            .map(|h| h.path.clone())
            .collect()
    }

    /// Outputs whose current content differs from the recorded hash.
    pub fn changed_outputs(&self) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|h| FileHash::of(Path::new(&h.path)).map_or(true, |now| now.sha256 != h.sha256))
            .map(|h| h.path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_path_appends_suffix() {
        assert_eq!(
            manifest_path(Path::new("/tmp/x/samples.jsonl")),
            PathBuf::from("/tmp/x/samples.jsonl.manifest.json")
        );
    }

    #[test]
    fn round_trip_and_change_detection() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let output = dir.path().join("out.txt");
        std::fs::write(&input, "a").unwrap();
        std::fs::write(&output, "b").unwrap();
        let m = Manifest::new(
            "generate",
            &["generate".into()],
            &[&input],
            &[&output],
            serde_json::json!({}),
            3,
        )
        .unwrap();
        m.write().unwrap();
        let back = Manifest::load(&manifest_path(&output)).unwrap();
        assert_eq!(back, m);
        assert!(back.changed_inputs().is_empty());
        std::fs::write(&input, "changed").unwrap();
        assert_eq!(back.changed_inputs(), [input.display().to_string()]);
        let text = std::fs::read_to_string(manifest_path(&output)).unwrap();
        assert!(!text.contains("time"));
    }
}
