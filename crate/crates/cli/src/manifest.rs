//! Per-run manifest: resolved configuration, seed, file digests, timestamps.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub name: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    loop {
        let n = f
            .read(&mut buf)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(format!("{:x}", h.finalize()))
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Output directory of one command invocation; tracks what it read and wrote.
pub struct Run {
    pub dir: PathBuf,
    command: &'static str,
    name: String,
    seed: u64,
    config: serde_json::Value,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
    started: u64,
}

impl Run {
    pub fn create(
        out: &Path,
        command: &'static str,
        name: &str,
        seed: u64,
        config: serde_json::Value,
    ) -> Result<Self> {
        if name.is_empty() || name.contains(['/', '\\']) || name == "." || name == ".." {
            return Err(CliError::validation(format!("bad run name `{name}`")).into());
        }
        // created on first write, so a failing command leaves nothing behind
        let dir = out.join(command).join(name);
        Ok(Self {
            dir,
            command,
            name: name.to_string(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: unix_now(),
        })
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    /// Writes `file` in the run directory through `body`.
    pub fn write(
        &mut self,
        file: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.dir)
            .map_err(|e| CliError::io(format!("{}: {e}", self.dir.display())))?;
        let path = self.dir.join(file);
        let io_err = |e: std::io::Error| CliError::io(format!("{}: {e}", path.display()));
        let mut w = BufWriter::new(File::create(&path).map_err(io_err)?);
        body(&mut w).and_then(|_| w.flush()).map_err(io_err)?;
        self.outputs.push(file.to_string());
        Ok(path)
    }

    pub fn write_json(&mut self, file: &str, value: &impl Serialize) -> Result<PathBuf> {
        self.write(file, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)
        })
    }

    pub fn finish(self) -> Result<PathBuf> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|f| {
                Ok(FileDigest {
                    path: f.clone(),
                    sha256: sha256_file(&self.dir.join(f))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            name: self.name,
            seed: self.seed,
            config: self.config,
            inputs,
            outputs,
            started_unix: self.started,
            finished_unix: unix_now(),
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(&path, text)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Ok(self.dir)
    }
}
