//! Run bookkeeping: output-directory locks, input hashing and `run.json`.

use std::fs::File;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::CliError;

pub const LOCK_FILE: &str = ".flowssm.lock";

/// Exclusive lock on an output directory, released on drop.
pub struct DirLock {
    _file: File,
}

impl DirLock {
    pub fn acquire(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(LOCK_FILE);
        let file = File::options()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| CliError::io(&path, e))?;
        match file.try_lock() {
            Ok(()) => Ok(Self { _file: file }),
            Err(std::fs::TryLockError::WouldBlock) => Err(CliError::Io(format!(
                "{} is locked by another flowssm process",
                dir.display()
            ))),
            Err(std::fs::TryLockError::Error(e)) => Err(CliError::io(&path, e)),
        }
    }
}

/// SHA-256 over the file names and contents of `inputs`, in the given order.
pub fn hash_inputs(inputs: &[PathBuf]) -> Result<String, CliError> {
    let mut h = Sha256::new();
    for p in inputs {
        let bytes = std::fs::read(p).map_err(|e| CliError::io(p, e))?;
        let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        h.update((name.len() as u64).to_le_bytes());
        h.update(name.as_bytes());
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(&bytes);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Serialize)]
pub struct RunRecord<'a, C: Serialize> {
    pub command: &'a str,
    pub software_version: &'a str,
    pub seed: u64,
    pub input_hash: String,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub config: &'a C,
}

pub fn write_run_json<C: Serialize>(dir: &Path, record: &RunRecord<'_, C>) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(record).expect("run record serializes");
    super::write_file(&dir.join("run.json"), json.as_bytes())
}
