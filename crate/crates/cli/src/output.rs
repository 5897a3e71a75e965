//! Output directory handling, CSV/JSON writers and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

/// Recorded output file.
#[derive(Debug, Clone, Serialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub spingate: &'static str,
    pub spingate_cli: &'static str,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: String,
    pub args: Vec<String>,
    pub seed: u64,
    pub config_sha256: String,
    pub versions: Versions,
    pub wall_time_s: f64,
    pub outputs: Vec<OutputFile>,
}

/// Collects the files a subcommand writes; `finish` adds the manifest.
pub struct Run {
    dir: PathBuf,
    command: String,
    started: Instant,
    outputs: Vec<OutputFile>,
}

impl Run {
    /// Creates `dir` and echoes the resolved configuration into it.
    pub fn start(dir: PathBuf, command: &str, cfg: &RunConfig) -> CliResult<Self> {
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        let mut run = Self {
            dir,
            command: command.to_string(),
            started: Instant::now(),
            outputs: Vec::new(),
        };
        let path = run.path("resolved_config.json");
        run.write(&path, cfg.to_json().as_bytes())?;
        Ok(run)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// `explicit` if given, else `name` inside the output directory.
    pub fn path_or(&self, explicit: &Option<PathBuf>, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| self.path(name))
    }

    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> CliResult<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        fs::write(path, bytes).map_err(|e| CliError::io(path, e))?;
        self.outputs.push(OutputFile {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, path: &Path, value: &T) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
        s.push('\n');
        self.write(path, s.as_bytes())
    }

    /// Writes `<command>.manifest.json` and returns its path.
    pub fn finish(self, cfg: &RunConfig) -> CliResult<PathBuf> {
        let manifest = Manifest {
            command: self.command.clone(),
            args: std::env::args().skip(1).collect(),
            seed: cfg.seed,
            config_sha256: cfg.sha256(),
            versions: Versions {
                spingate: spingate_version(),
                spingate_cli: env!("CARGO_PKG_VERSION"),
            },
            wall_time_s: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
        };
        let path = self.dir.join(format!("{}.manifest.json", self.command));
        let mut s = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::io(&path, e))?;
        s.push('\n');
        fs::write(&path, s).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

/// Both crates share the workspace version.
fn spingate_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// CSV text with LF line endings; floats in shortest round-trip form.
pub fn csv_text(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Parses `start:stop:step`; the grid includes `stop` when it lands on a step
/// within round-off.
pub fn parse_range(s: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range '{s}' must be start:stop:step"));
    }
    let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("range '{s}': {e}"));
    let (start, stop, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if ![start, stop, step].iter().all(|v| v.is_finite()) {
        return Err(format!("range '{s}' must be finite"));
    }
    if !(step > 0.0) {
        return Err(format!("range '{s}': step must be positive"));
    }
    if stop < start {
        return Err(format!("range '{s}': stop is below start"));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}
