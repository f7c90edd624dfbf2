use std::path::{Path, PathBuf};

use mocap_gapeval::io::atomic_write;
use mocap_gapeval::Error;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliResult;

#[derive(Serialize)]
struct FileEntry {
    path: String,
    sha256: String,
}

/// Record of one command run: arguments and hashes of every file read or
/// written. Carries no timestamps so identical runs give identical files.
#[derive(Serialize)]
pub struct Manifest {
    tool: &'static str,
    version: &'static str,
    command: String,
    args: Vec<String>,
    inputs: Vec<FileEntry>,
    outputs: Vec<FileEntry>,
}

fn hash_file(path: &Path) -> CliResult<FileEntry> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileEntry {
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

impl Manifest {
    pub fn new(command: &str, args: &[String]) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            args: args.to_vec(),
            inputs: vec![],
            outputs: vec![],
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.push(hash_file(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> CliResult<()> {
        self.outputs.push(hash_file(path)?);
        Ok(())
    }

    /// Write next to `primary` as `<primary>.manifest.json`.
    pub fn write_beside(&self, primary: &Path) -> CliResult<PathBuf> {
        let mut name = primary.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        let path = primary.with_file_name(name);
        self.write_to(&path)?;
        Ok(path)
    }

    pub fn write_to(&self, path: &Path) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialises");
        text.push('\n');
        atomic_write(path, text.as_bytes())?;
        Ok(())
    }
}
