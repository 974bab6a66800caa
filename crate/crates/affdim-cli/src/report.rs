//! Report envelope and CSV emission. Artifacts are byte-stable: no
//! timestamps, fixed field order, shortest round-trip float formatting,
//! RFC 4180 CSV with LF line endings.

use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Serialize)]
pub struct ReportHeader {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: Option<u64>,
    /// Effective system description after defaults were applied.
    pub system: serde_json::Value,
    /// Metric used for distances on the affine group.
    pub metric: &'static str,
    /// Calibration constants baked into the checks.
    pub calibrations: BTreeMap<&'static str, f64>,
    /// Budget/tolerance overrides from the command line.
    pub tolerances: BTreeMap<String, f64>,
}

pub fn calibrations() -> BTreeMap<&'static str, f64> {
    let mut map = BTreeMap::new();
    map.insert("equal_singular_value_rel_gap", affdim_core::affine::EQUAL_SV_TOL);
    map.insert("singular_matrix_rel_tol", affdim_core::affine::SINGULAR_TOL);
    map.insert("coincidence_tol", affdim_core::separation::COINCIDENCE_TOL);
    map.insert("invariance_tol", 1e-9);
    map.insert("conic_threshold", 1e-6);
    map.insert("h3_threshold_bits", 0.05);
    map.insert("alpha_tolerance", 0.1);
    map
}

#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub header: ReportHeader,
    pub result: T,
}

/// One CSV cell; numbers are formatted with the shortest round-trip
/// representation, decimal point, no exponent surprises for table use.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn csv_escape(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub fn csv_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&headers.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|c| csv_escape(c)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub struct Artifacts {
    dir: PathBuf,
    pub written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &str) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Artifacts {
            dir: Path::new(dir).to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let path = self.dir.join(name);
        let mut file = std::fs::File::create(&path)?;
        let text = serde_json::to_string_pretty(value).expect("reports serialize");
        file.write_all(text.as_bytes())?;
        file.write_all(b"\n")?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, content: &str) -> std::io::Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, content)?;
        self.written.push(name.to_string());
        Ok(())
    }
}
