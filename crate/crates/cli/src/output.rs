//! CSV rendering and atomic file output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use qbm_core::entropy::ThermoTrace;
use tempfile::NamedTempFile;

use crate::error::CliError;

/// 12 significant digits, scientific notation.
pub fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        v.to_string()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn trace_csv(trace: &ThermoTrace) -> String {
    let mut out = String::from("t,Pi,E_N,S2,Phi\n");
    for i in 0..trace.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(trace.times[i]),
            num(trace.pi[i]),
            num(trace.e_n[i]),
            num(trace.s2[i]),
            num(trace.phi[i])
        );
    }
    out
}

/// Builds a CSV table row by row.
pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Named file contents produced by a run, written together at the end.
#[derive(Debug, Default)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
    pub notes: Vec<String>,
}

impl Artifacts {
    pub fn add(&mut self, name: impl Into<String>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }
}

/// Writes `contents` to `dir/name` through a temporary file in `dir` and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let target = dir.join(name);
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(&target, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(&target, e))?;
    tmp.persist(&target).map_err(|e| CliError::io(&target, e.error))?;
    Ok(target)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(num(1.0), "1.00000000000e0");
        assert_eq!(num(-0.000123456789012345), "-1.23456789012e-4");
        assert_eq!(opt(None), "");
    }

    #[test]
    fn trace_header_and_rows() {
        let trace = ThermoTrace {
            times: vec![0.0, 1.0],
            pi: vec![0.5, 0.25],
            e_n: vec![1.0, 0.0],
            s2: vec![0.0, 0.1],
            phi: vec![0.0, -0.1],
            pi_origin_extrapolated: false,
        };
        let csv = trace_csv(&trace);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,Pi,E_N,S2,Phi");
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[2].split(',').count(), 5);
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        write_atomic(dir.path(), "a.csv", "one\n").unwrap();
        let p = write_atomic(dir.path(), "a.csv", "two\n").unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "two\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
