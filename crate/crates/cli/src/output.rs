//! Output files with provenance: CSVs start with a `# config_hash=` comment
//! line, JSON documents carry a `config_hash` field.

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Hash over the resolved settings and the bytes of every input file.
#[derive(Debug, Default)]
pub struct Provenance {
    hasher: Sha256,
}

impl Provenance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_settings<T: Serialize>(&mut self, settings: &T) -> Result<(), CliError> {
        let json = serde_json::to_vec(settings).map_err(|e| CliError::Internal(e.to_string()))?;
        self.add_bytes("settings", &json);
        Ok(())
    }

    pub fn add_bytes(&mut self, label: &str, bytes: &[u8]) {
        self.hasher.update(label.as_bytes());
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    pub fn finish(self) -> String {
        hex::encode(self.hasher.finalize())
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("creating {}: {e}", dir.display())))
}

/// Writes a CSV produced by `body` behind the hash comment line.
pub fn write_csv<F>(path: &Path, hash: &str, body: F) -> Result<(), CliError>
where
    F: FnOnce(&mut Vec<u8>) -> ufc_core::Result<()>,
{
    let mut buf = format!("# config_hash={hash}\n").into_bytes();
    body(&mut buf).map_err(CliError::from)?;
    fs::write(path, buf).map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn to_json<T: Serialize>(hash: &str, body: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(&Stamped { config_hash: hash, body })
        .map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, hash: &str, body: &T) -> Result<(), CliError> {
    fs::write(path, to_json(hash, body)?)
        .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display())))
}
