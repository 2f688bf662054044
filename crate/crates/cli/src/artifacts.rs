//! Output files, the run manifest, and replay comparison.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::{CliError, Command};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_ECHO: &str = "config.json";
pub const ERROR_FILE: &str = "error.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
    /// Header of a CSV artifact, in file order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    /// Result data, as opposed to the config echo; only these are compared on replay.
    pub numeric: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: Command,
    pub config: Value,
    /// sha256 over "blob <len>\0" followed by the config echo.
    pub input_hash: String,
    pub wall_time_seconds: f64,
    pub threads: usize,
    pub exit_code: i32,
    pub artifacts: Vec<ArtifactEntry>,
    pub verdict: Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

pub fn blob_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    format!("{:x}", h.finalize())
}

/// Collects artifacts in one output directory, recording a hash for each.
pub struct Artifacts {
    dir: PathBuf,
    entries: Vec<ArtifactEntry>,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Artifacts { dir: dir.to_path_buf(), entries: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entries(&self) -> &[ArtifactEntry] {
        &self.entries
    }

    fn record(&mut self, name: &str, bytes: Vec<u8>, columns: Option<Vec<String>>, numeric: bool) -> Result<(), CliError> {
        write_file(&self.dir.join(name), &bytes)?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(ArtifactEntry {
            path: name.to_string(),
            sha256: sha256_hex(&bytes),
            bytes: bytes.len() as u64,
            columns,
            numeric,
        });
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push(b'\n');
        self.record(name, text, None, true)
    }

    pub fn config_echo(&mut self, value: &Value) -> Result<Vec<u8>, CliError> {
        let mut text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push(b'\n');
        self.record(CONFIG_ECHO, text.clone(), None, false)?;
        Ok(text)
    }

    /// CSV with a header row; floats use the shortest round-trip form.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fail = |e: csv::Error| CliError::Internal(e.to_string());
        w.write_record(header).map_err(fail)?;
        for row in rows {
            w.write_record(row.iter().map(Cell::render)).map_err(fail)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
        self.record(name, bytes, Some(header.iter().map(|s| s.to_string()).collect()), true)
    }

    /// Writes the manifest through a temporary file and a rename, so it appears complete or not at all.
    pub fn finish(self, manifest: &RunManifest) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_vec_pretty(manifest).map_err(|e| CliError::Internal(e.to_string()))?;
        text.push(b'\n');
        let tmp = self.dir.join(".manifest.json.tmp");
        let dest = self.dir.join(MANIFEST);
        write_file(&tmp, &text)?;
        fs::rename(&tmp, &dest).map_err(|e| CliError::io(&dest, e))?;
        Ok(dest)
    }
}

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => v.to_string(),
            Cell::Int(v) => v.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub identical: bool,
    /// Name of the first artifact, in manifest order, whose bytes differ.
    pub first_difference: Option<String>,
    pub compared: usize,
}

fn read_manifest(path: &Path) -> Result<RunManifest, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// The config with the fields that may differ between replays removed.
fn comparable(config: &Value) -> Value {
    let mut c = config.clone();
    if let Some(obj) = c.as_object_mut() {
        obj.remove("seed");
        obj.remove("output_dir");
        if let Some(solver) = obj.get_mut("solver").and_then(Value::as_object_mut) {
            solver.remove("seed");
        }
    }
    c
}

fn artifact_hash(dir: &Path, entry: &ArtifactEntry) -> Result<String, CliError> {
    let path = dir.join(&entry.path);
    let bytes = fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Compares the numeric artifacts of two runs byte for byte. Seeds, output directories and
/// thread counts may differ; anything else in the configs must match.
pub fn replay_check(manifest_a: &Path, manifest_b: &Path) -> Result<ReplayReport, CliError> {
    let (a, b) = (read_manifest(manifest_a)?, read_manifest(manifest_b)?);
    if a.command != b.command || comparable(&a.config) != comparable(&b.config) {
        return Err(CliError::Config("manifests come from different configs".into()));
    }
    let dir_a = manifest_a.parent().unwrap_or(Path::new("."));
    let dir_b = manifest_b.parent().unwrap_or(Path::new("."));
    let numeric = |m: &RunManifest| m.artifacts.iter().filter(|e| e.numeric).cloned().collect::<Vec<_>>();
    let (list_a, list_b) = (numeric(&a), numeric(&b));
    let mut compared = 0;
    for ea in &list_a {
        let Some(eb) = list_b.iter().find(|e| e.path == ea.path) else {
            return Ok(ReplayReport { identical: false, first_difference: Some(ea.path.clone()), compared });
        };
        compared += 1;
        if artifact_hash(dir_a, ea)? != artifact_hash(dir_b, eb)? {
            return Ok(ReplayReport { identical: false, first_difference: Some(ea.path.clone()), compared });
        }
    }
    if let Some(extra) = list_b.iter().find(|e| !list_a.iter().any(|x| x.path == e.path)) {
        return Ok(ReplayReport { identical: false, first_difference: Some(extra.path.clone()), compared });
    }
    Ok(ReplayReport { identical: true, first_difference: None, compared })
}
