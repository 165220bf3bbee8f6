//! Run manifests: every command ends by writing `manifest.json` indexing
//! the artifacts it produced, the merged config echo, and the config hash.
//! Wall-clock time lives here and only here; the numerical artifacts stay
//! byte-reproducible under identical config.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use crate::config::RunConfig;
use crate::Failure;

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: BTreeMap<String, String>,
    pub config_hash: String,
    pub out_dir: String,
    pub wall_clock_ms: u128,
    pub outputs: Vec<String>,
}

/// Collects artifacts for one command run and writes the manifest last,
/// so every file on disk is indexed (no orphans). All writes go through
/// this single writer; commands never write files directly.
pub struct ArtifactWriter {
    dir: PathBuf,
    command: String,
    config: BTreeMap<String, String>,
    config_hash: String,
    started: Instant,
    outputs: Vec<String>,
}

impl ArtifactWriter {
    pub fn new(dir: PathBuf, command: &str, cfg: &RunConfig) -> Result<Self, Failure> {
        std::fs::create_dir_all(&dir)
            .map_err(|e| Failure::Io(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            command: command.to_string(),
            config: cfg.echo(),
            config_hash: cfg.hash(),
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    /// Writes one artifact and records it in the manifest index.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    /// Serializes a value as pretty JSON (LF, trailing newline) and writes
    /// it as an artifact.
    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| Failure::Io(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Writes `manifest.json` and consumes the writer.
    pub fn finish(self) -> Result<(), Failure> {
        let manifest = RunManifest {
            command: self.command,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: self.config,
            config_hash: self.config_hash,
            out_dir: self.dir.display().to_string(),
            wall_clock_ms: self.started.elapsed().as_millis(),
            outputs: self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Failure::Io(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, text)
            .map_err(|e| Failure::Io(format!("cannot write {}: {e}", path.display())))
    }
}

/// Output directory: an explicit path wins; otherwise CHANDRA_OUT_DIR (or
/// ./runs) is the root and the command name the subdirectory.
pub fn resolve_out_dir(explicit: Option<PathBuf>, command: &str) -> PathBuf {
    match explicit {
        Some(p) => p,
        None => std::env::var_os("CHANDRA_OUT_DIR")
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("runs"))
            .join(command),
    }
}
