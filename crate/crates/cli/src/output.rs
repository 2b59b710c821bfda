//! CSV tables and run manifests.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Sweep;

#[derive(Clone, Copy, Debug)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

pub const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) if x.is_nan() => "nan".into(),
            Cell::Num(x) if x.is_infinite() => if *x > 0.0 { "inf" } else { "-inf" }.into(),
            Cell::Num(x) => format!("{x:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Row {
    pub cells: Vec<Cell>,
    pub flags: Vec<String>,
}

impl Row {
    pub fn new(cells: Vec<Cell>) -> Self {
        Self { cells, flags: vec![] }
    }

    pub fn nums(values: &[f64]) -> Self {
        Self::new(values.iter().map(|x| Cell::Num(*x)).collect())
    }

    pub fn flag(mut self, f: impl Into<String>) -> Self {
        self.flags.push(f.into());
        self
    }
}

/// Validity flags of one sweep point (or of the single run).
#[derive(Clone, Debug, Default, Serialize, PartialEq)]
pub struct RunFlags {
    pub index: usize,
    pub sweep_value: Option<f64>,
    pub truncation_weight: f64,
    pub positivity_repair: f64,
    pub slow_driving_violated: bool,
    pub regime: Option<String>,
    pub notes: Vec<String>,
}

/// Tail population above which a row carries a `truncation` flag; the
/// integrator aborts at 1e-6.
pub const TRUNCATION_WARN: f64 = 1e-8;
/// Eigenvalue repairs below this are round-off and stay in the manifest
/// only; the integrator aborts at 1e-8.
pub const REPAIR_WARN: f64 = 1e-9;

impl RunFlags {
    /// Row-level tokens implied by the run-level flags.
    pub fn row_tokens(&self) -> Vec<String> {
        let mut out = vec![];
        if self.truncation_weight > TRUNCATION_WARN {
            out.push(format!("truncation={:.3e}", self.truncation_weight));
        }
        if self.positivity_repair > REPAIR_WARN {
            out.push(format!("positivity_repair={:.3e}", self.positivity_repair));
        }
        if self.slow_driving_violated {
            out.push("slow_driving".into());
        }
        out
    }

    pub fn absorb(&mut self, f: &qmachine_core::passivity::TrajectoryFlags) {
        self.truncation_weight = self.truncation_weight.max(f.truncation_weight);
        self.positivity_repair = self.positivity_repair.max(f.positivity_repair);
        self.slow_driving_violated |= f.slow_driving_violated;
    }
}

pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<Column>,
    pub rows: Vec<Row>,
}

impl Table {
    /// Comma-separated, LF-terminated, 17 significant digits, `#` header
    /// comments carrying the column units, trailing `flags` column.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str(&format!("# {c}\n"));
        }
        for c in &self.columns {
            out.push_str(&format!("# {}: {}\n", c.name, c.unit));
        }
        out.push_str("# flags: semicolon-separated validity annotations, empty when clean\n");
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(vec![]);
        let header: Vec<&str> = self.columns.iter().map(|c| c.name).chain(["flags"]).collect();
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            debug_assert_eq!(r.cells.len(), self.columns.len());
            let rec: Vec<String> = r.cells.iter().map(Cell::render).chain([r.flags.join(";")]).collect();
            w.write_record(&rec).expect("in-memory write");
        }
        out.push_str(std::str::from_utf8(&w.into_inner().expect("flush")).expect("utf-8"));
        out
    }
}

#[derive(Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: &'static str,
    pub preset: Option<&'static str>,
    pub csv: String,
    pub seed: u64,
    /// Canonical config text; running it reproduces the CSV.
    pub config: String,
    pub sweep: Option<Sweep>,
    pub rows: usize,
    pub runs: Vec<RunFlags>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunManifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("serializable");
        s.push('\n');
        s
    }
}

/// `run.csv` -> `run.manifest.json`.
pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn ensure_parent(path: &Path) -> std::io::Result<()> {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => fs::create_dir_all(d),
        _ => Ok(()),
    }
}
