//! Result directory: per-output files plus `manifest.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path as FsPath, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::checks::Check;
use crate::error::{CliError, CliResult};

pub struct Bundle {
    dir: PathBuf,
    outputs: Vec<String>,
    started: Instant,
    started_unix_s: f64,
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub cli_version: &'static str,
    pub library_version: &'static str,
    pub command: &'a str,
    pub spec: &'a serde_json::Value,
    pub seeds: &'a [u64],
    pub outputs: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checks: Option<&'a [Check]>,
    pub started_unix_s: f64,
    pub wall_time_s: f64,
}

fn io_err(path: &FsPath, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Bundle {
    pub fn create(dir: impl Into<PathBuf>) -> CliResult<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let started_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64());
        Ok(Bundle { dir, outputs: Vec::new(), started: Instant::now(), started_unix_s })
    }

    pub fn dir(&self) -> &FsPath {
        &self.dir
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// Opens `name` for writing and records it as an output.
    pub fn writer(&mut self, name: &str) -> CliResult<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| io_err(&path, e))?;
        self.outputs.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    /// Writes a file through a library writer that reports `ddsound::Error`.
    pub fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> ddsound::Result<()>,
    ) -> CliResult<()> {
        let mut w = self.writer(name)?;
        f(&mut w)?;
        w.flush().map_err(|e| io_err(&self.dir.join(name), e))
    }

    /// One header row from the field names, one row per element.
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T], header: &[&str]) -> CliResult<()> {
        let mut w = csv::Writer::from_writer(self.writer(name)?);
        if rows.is_empty() {
            w.write_record(header)?;
        }
        for row in rows {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| io_err(&self.dir.join(name), e))
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let path = self.dir.join(name);
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(&path, e))?;
        writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))
    }

    /// Writes `manifest.json`. Not listed among the outputs.
    pub fn finish(self, command: &str, spec: &serde_json::Value, seeds: &[u64], checks: Option<&[Check]>) -> CliResult<PathBuf> {
        let manifest = Manifest {
            tool: "ddsound",
            cli_version: env!("CARGO_PKG_VERSION"),
            library_version: ddsound::VERSION,
            command,
            spec,
            seeds,
            outputs: &self.outputs,
            checks,
            started_unix_s: self.started_unix_s,
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        let path = self.dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        Ok(path)
    }
}

/// Writes an error record into `dir` if it can be created; failures here are ignored
/// because the record is also printed on stderr.
pub fn write_error_record(dir: &FsPath, record: &impl Serialize) {
    if fs::create_dir_all(dir).is_ok() {
        if let Ok(text) = serde_json::to_string_pretty(record) {
            let _ = fs::write(dir.join("error.json"), text + "\n");
        }
    }
}
