//! Reproducibility manifest: config echo, artifact checksums, stage timings
//! and verification outcomes, written atomically at the end of each command.
//!
//! A run directory is keyed by the hash of its fully-defaulted config. Opening
//! it with the same config keeps the recorded artifacts so later commands can
//! reuse them after a checksum match; a different config starts a fresh
//! manifest and everything is rebuilt.

use std::fs::{self, File};
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use landscape_core::io::write_atomic;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::fail::{CliResult, Fail};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Artifact {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommandRecord {
    pub command: String,
    /// Stage name and wall-clock seconds, in execution order.
    pub stages: Vec<(String, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Verification {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub config_sha256: String,
    pub config: RunConfig,
    pub threads: usize,
    pub seed_override: Option<u64>,
    pub commands: Vec<CommandRecord>,
    pub artifacts: Vec<Artifact>,
    pub verifications: Vec<Verification>,
}

pub struct RunDir {
    pub out: PathBuf,
    pub manifest: Manifest,
}

impl RunDir {
    pub fn open(
        out: &Path,
        config: &RunConfig,
        threads: usize,
        seed_override: Option<u64>,
    ) -> CliResult<Self> {
        fs::create_dir_all(out)?;
        let config_sha256 = sha256_bytes(
            &serde_json::to_vec(config).map_err(|e| Fail::Config(e.to_string()))?,
        );
        let manifest_path = out.join(MANIFEST_NAME);
        let manifest = match fs::read_to_string(&manifest_path) {
            Ok(text) => match serde_json::from_str::<Manifest>(&text) {
                Ok(prev) if prev.config_sha256 == config_sha256 => Manifest {
                    threads,
                    seed_override,
                    config: config.clone(),
                    ..prev
                },
                Ok(_) | Err(_) => fresh(config_sha256, config, threads, seed_override),
            },
            Err(_) => fresh(config_sha256, config, threads, seed_override),
        };
        Ok(Self { out: out.to_path_buf(), manifest })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    /// True when `name` is listed and the file on disk matches its checksum.
    /// A listed file with a different hash is a hard error: somebody edited
    /// an artifact this manifest vouches for.
    pub fn has_valid(&self, name: &str) -> CliResult<bool> {
        let Some(entry) = self.manifest.artifacts.iter().find(|a| a.name == name) else {
            return Ok(false);
        };
        let path = self.path(name);
        if !path.exists() {
            return Ok(false);
        }
        let sha = sha256_file(&path)?;
        if sha != entry.sha256 {
            return Err(Fail::Config(format!(
                "stale checksum for {name}: manifest has {}, file has {sha}; \
                 remove the file or the manifest to rebuild",
                entry.sha256
            )));
        }
        Ok(true)
    }

    /// Hashes the file now and upserts its entry.
    pub fn record(&mut self, name: &str) -> CliResult<()> {
        let path = self.path(name);
        let sha256 = sha256_file(&path)?;
        let bytes = fs::metadata(&path)?.len();
        let entry = Artifact { name: name.to_string(), sha256, bytes };
        match self.manifest.artifacts.iter_mut().find(|a| a.name == name) {
            Some(slot) => *slot = entry,
            None => self.manifest.artifacts.push(entry),
        }
        Ok(())
    }

    pub fn record_verification(&mut self, name: &str, pass: bool, detail: String) {
        let entry = Verification { name: name.to_string(), pass, detail };
        match self.manifest.verifications.iter_mut().find(|v| v.name == name) {
            Some(slot) => *slot = entry,
            None => self.manifest.verifications.push(entry),
        }
    }

    pub fn push_command(&mut self, command: &str, stages: Vec<(String, f64)>) {
        self.manifest.commands.push(CommandRecord { command: command.to_string(), stages });
    }

    pub fn save(&self) -> CliResult<()> {
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| Fail::Config(e.to_string()))?;
        write_atomic(&self.path(MANIFEST_NAME), |w| {
            w.write_all(text.as_bytes())?;
            w.write_all(b"\n")?;
            Ok(())
        })
        .map_err(Fail::from)
    }
}

fn fresh(
    config_sha256: String,
    config: &RunConfig,
    threads: usize,
    seed_override: Option<u64>,
) -> Manifest {
    Manifest {
        config_sha256,
        config: config.clone(),
        threads,
        seed_override,
        commands: Vec::new(),
        artifacts: Vec::new(),
        verifications: Vec::new(),
    }
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex(&h.finalize())
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let mut r = BufReader::new(File::open(path)?);
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = r.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
