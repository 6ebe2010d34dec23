//! Run directories, manifests and atomic file output.
//!
//! Every run writes into `<root>/<subcommand>-<hash12>/`. Files are written
//! to a hidden temporary name and renamed into place, so a reader never sees
//! a partial CSV. A run that fails midway leaves a `FAILED` marker.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use replab_core::{Config, Grid};

pub const FAILURE_MARKER: &str = "FAILED";
pub const MANIFEST: &str = "manifest.json";
pub const OUT_ENV: &str = "REPLAB_OUT";

/// Writes `bytes` to `path` through a sibling temporary file.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "output path has no file name"))?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// SHA-256 over the canonical config text, the subcommand and its arguments.
pub fn config_hash(config: &Config, subcommand: &str, args: &serde_json::Value) -> String {
    let canonical = toml::to_string(config).expect("config serializes");
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    h.update(b"\0");
    h.update(subcommand.as_bytes());
    h.update(b"\0");
    h.update(args.to_string().as_bytes());
    format!("{:x}", h.finalize())
}

/// Output root: `$REPLAB_OUT` if set, else `output.dir` of the config.
pub fn output_root(config: &Config) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from(&config.output.dir),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SpecSummary {
    pub epsilon: f64,
    pub dim: usize,
    pub sector: usize,
    pub q1: String,
    pub q2: String,
    pub rho: f64,
    pub tau: Option<f64>,
    pub beta_c: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub subcommand: String,
    pub args: serde_json::Value,
    pub spec: SpecSummary,
    pub grid: Option<Grid>,
    pub seed: u64,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub outputs: Vec<String>,
    pub passed: bool,
    pub version: String,
}

impl RunManifest {
    pub fn new(config: &Config, subcommand: &str, args: serde_json::Value, hash: String) -> Self {
        let m = &config.model;
        let p = config.potential.clone().unwrap_or_default();
        Self {
            config_hash: hash,
            subcommand: subcommand.into(),
            args,
            spec: SpecSummary {
                epsilon: m.epsilon,
                dim: m.dim,
                sector: m.sector,
                q1: p.q1.unwrap_or_else(|| m.q1.clone()),
                q2: p.q2.unwrap_or_else(|| m.q2.clone()),
                rho: m.rho,
                tau: m.tau,
                beta_c: config.spec().ok().map(|s| s.beta_c()),
            },
            grid: config.grid().ok(),
            seed: config.seed,
            timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            outputs: Vec::new(),
            passed: false,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }
}

/// Directory of one run plus the list of files written so far.
#[derive(Debug)]
pub struct RunDir {
    pub path: PathBuf,
    outputs: Vec<String>,
}

impl RunDir {
    pub fn create(root: &Path, subcommand: &str, hash: &str) -> io::Result<Self> {
        let path = root.join(format!("{subcommand}-{}", &hash[..12]));
        fs::create_dir_all(&path)?;
        let marker = path.join(FAILURE_MARKER);
        if marker.exists() {
            fs::remove_file(marker)?;
        }
        Ok(Self {
            path,
            outputs: Vec::new(),
        })
    }

    pub fn outputs(&self) -> &[String] {
        &self.outputs
    }

    /// Writes `name` inside the run directory.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> io::Result<PathBuf> {
        let p = self.path.join(name);
        atomic_write(&p, bytes)?;
        self.outputs.push(name.into());
        Ok(p)
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> io::Result<()>) -> io::Result<PathBuf> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes a file outside the run directory (an explicit `--out`),
    /// with a `<file>.manifest` pointer back to this run.
    pub fn write_external(&mut self, path: &Path, bytes: &[u8]) -> io::Result<()> {
        atomic_write(path, bytes)?;
        let mut pointer = path.as_os_str().to_owned();
        pointer.push(".manifest");
        let manifest = fs::canonicalize(&self.path)?.join(MANIFEST);
        atomic_write(Path::new(&pointer), format!("{}\n", manifest.display()).as_bytes())?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn mark_failed(&self, message: &str) {
        let _ = atomic_write(&self.path.join(FAILURE_MARKER), format!("{message}\n").as_bytes());
    }

    pub fn finish(&self, mut manifest: RunManifest, passed: bool) -> io::Result<()> {
        manifest.outputs = self.outputs.clone();
        manifest.passed = passed;
        let mut text = serde_json::to_string_pretty(&manifest).map_err(io::Error::other)?;
        text.push('\n');
        atomic_write(&self.path.join(MANIFEST), text.as_bytes())
    }
}
