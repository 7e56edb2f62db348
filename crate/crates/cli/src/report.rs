//! JSON run reports with provenance: resolved config, seed and content
//! hashes of every input and output file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, ExitCode};

pub const REPORT_FORMAT_VERSION: u32 = 1;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn hash_file(path: &Path, code: ExitCode) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::new(code, format!("reading {}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

/// Digest over the hashes of many files, in the given order.
pub fn hash_files<'a>(paths: impl IntoIterator<Item = &'a Path>, code: ExitCode) -> Result<String, CliError> {
    let mut hasher = Sha256::new();
    for p in paths {
        hasher.update(hash_file(p, code)?.as_bytes());
        hasher.update(b"\n");
    }
    Ok(format!("{:x}", hasher.finalize()))
}

#[derive(Debug, Default, Serialize)]
pub struct Provenance {
    /// Input name → sha256 of its content.
    pub inputs: BTreeMap<String, String>,
    /// Output file name (relative to the output directory) → sha256.
    pub outputs: BTreeMap<String, String>,
}

#[derive(Serialize)]
pub struct Report<'a, C: Serialize, R: Serialize> {
    pub format_version: u32,
    pub command: &'a str,
    pub seed: u64,
    pub config: &'a C,
    pub inputs: &'a BTreeMap<String, String>,
    pub outputs: &'a BTreeMap<String, String>,
    pub result: &'a R,
}

/// Writes files into an output directory and remembers their hashes.
pub struct OutDir {
    root: PathBuf,
    pub provenance: Provenance,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(root)
            .map_err(|e| CliError::new(ExitCode::Other, format!("creating {}: {e}", root.display())))?;
        Ok(Self {
            root: root.to_path_buf(),
            provenance: Provenance::default(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn input(&mut self, name: &str, hash: String) {
        self.provenance.inputs.insert(name.to_string(), hash);
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::new(ExitCode::Other, format!("writing {}: {e}", path.display())))?;
        self.provenance.outputs.insert(name.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    /// Records a file some library routine already wrote.
    pub fn record(&mut self, name: &str) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let hash = hash_file(&path, ExitCode::Other)?;
        self.provenance.outputs.insert(name.to_string(), hash);
        Ok(path)
    }

    /// Writes `<command>_report.json` last so it can list every other output.
    pub fn finish<C: Serialize, R: Serialize>(
        self,
        command: &str,
        seed: u64,
        config: &C,
        result: &R,
    ) -> Result<PathBuf, CliError> {
        let report = Report {
            format_version: REPORT_FORMAT_VERSION,
            command,
            seed,
            config,
            inputs: &self.provenance.inputs,
            outputs: &self.provenance.outputs,
            result,
        };
        let mut text = serde_json::to_string_pretty(&report)
            .map_err(|e| CliError::new(ExitCode::Other, format!("serialising report: {e}")))?;
        text.push('\n');
        let path = self.root.join(format!("{}_report.json", command.replace('-', "_")));
        std::fs::write(&path, text)
            .map_err(|e| CliError::new(ExitCode::Other, format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
