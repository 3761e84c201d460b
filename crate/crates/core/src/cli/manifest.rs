use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::io::DataError;
use crate::model::TimeGrid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    /// `sessions`, `prices` or `scenario`.
    pub role: String,
    /// File path, or a description of the generator that produced the data.
    pub source: String,
    pub is_file: bool,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputDigest {
    pub file: String,
    pub sha256: String,
}

/// Provenance record written next to every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    /// Arguments after the program name; `evpeak rerun` replays them.
    pub args: Vec<String>,
    pub scenario_alias: Option<String>,
    /// Fully resolved scenario, paths included.
    pub scenario: Option<String>,
    pub inputs: Vec<InputDigest>,
    pub seed: Option<u64>,
    pub grid: Option<TimeGrid>,
    pub threads: usize,
    pub output: OutputDigest,
    pub wall_clock_seconds: f64,
}

impl RunManifest {
    pub fn path_for(output: &Path) -> std::path::PathBuf {
        let mut name = output.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        output.with_file_name(name)
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(crate::io::io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        let text = fs::read_to_string(path).map_err(crate::io::io_err(path))?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String, DataError> {
    Ok(sha256_hex(&fs::read(path).map_err(crate::io::io_err(path))?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_bytes() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn manifest_sits_next_to_output() {
        assert_eq!(
            RunManifest::path_for(Path::new("/out/peak_DE.csv")),
            Path::new("/out/peak_DE.csv.manifest.json")
        );
    }
}
