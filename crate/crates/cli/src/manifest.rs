//! `run_manifest.json`: what ran, on which bytes, how long each stage took.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FailurePoint {
    pub stage: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
    pub status: &'static str,
    pub exit_code: u8,
    pub failure: Option<FailurePoint>,
}

pub fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let mut hasher = Sha256::new();
    let mut file = std::fs::File::open(path)?;
    let bytes = std::io::copy(&mut file, &mut hasher)?;
    let digest = hasher.finalize();
    Ok((digest.iter().map(|b| format!("{b:02x}")).collect(), bytes))
}

/// Collects manifest fields while a command runs.
pub struct Recorder {
    pub manifest: RunManifest,
    pub dir: Option<PathBuf>,
    current_stage: Option<String>,
}

impl Recorder {
    pub fn new(command: &str, argv: Vec<String>) -> Self {
        Recorder {
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                argv,
                config: serde_json::Value::Null,
                inputs: Vec::new(),
                outputs: Vec::new(),
                stages: Vec::new(),
                warnings: Vec::new(),
                summary: serde_json::Value::Null,
                status: "ok",
                exit_code: 0,
                failure: None,
            },
            dir: None,
            current_stage: None,
        }
    }

    /// Directory that receives the manifest; created if missing.
    pub fn set_dir(&mut self, dir: &Path) -> anyhow::Result<()> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        self.dir = Some(dir.to_path_buf());
        Ok(())
    }

    /// Digests a file, or every regular file directly inside a directory.
    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        let mut files = Vec::new();
        if path.is_dir() {
            for entry in
                std::fs::read_dir(path).with_context(|| format!("listing {}", path.display()))?
            {
                let p = entry?.path();
                if p.is_file() && p.file_name().is_some_and(|n| n != MANIFEST_FILE) {
                    files.push(p);
                }
            }
            files.sort();
        } else {
            files.push(path.to_path_buf());
        }
        for f in files {
            let (sha256, bytes) =
                sha256_file(&f).with_context(|| format!("reading {}", f.display()))?;
            self.manifest.inputs.push(InputDigest {
                path: f.display().to_string(),
                sha256,
                bytes,
            });
        }
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.manifest.outputs.push(path.display().to_string());
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let message = message.into();
        log::warn!("{message}");
        self.manifest.warnings.push(message);
    }

    /// Times `f`. On error the stage stays current so a failure names it.
    pub fn stage<T>(
        &mut self,
        name: &str,
        f: impl FnOnce() -> anyhow::Result<T>,
    ) -> anyhow::Result<T> {
        self.current_stage = Some(name.to_string());
        let start = Instant::now();
        let out = f();
        self.manifest.stages.push(StageTiming {
            stage: name.to_string(),
            seconds: start.elapsed().as_secs_f64(),
        });
        if out.is_ok() {
            self.current_stage = None;
        }
        out
    }

    pub fn fail(&mut self, exit_code: u8, message: String) {
        self.manifest.status = "failed";
        self.manifest.exit_code = exit_code;
        self.manifest.failure = Some(FailurePoint {
            stage: self.current_stage.take(),
            message,
        });
    }

    /// Writes the manifest through a temporary file and a rename.
    pub fn write(&self) -> anyhow::Result<()> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(MANIFEST_FILE);
        let tmp = dir.join(format!(".{MANIFEST_FILE}.tmp"));
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(&tmp, text).with_context(|| format!("writing {}", tmp.display()))?;
        std::fs::rename(&tmp, &path).with_context(|| format!("renaming to {}", path.display()))?;
        Ok(())
    }
}
