//! Check records and deterministic report files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::CliError;

/// One pass/fail verdict.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    /// `|value - target| <= tolerance`.
    pub fn within(name: impl Into<String>, value: f64, target: f64, tolerance: f64) -> Self {
        let pass = (value - target).abs() <= tolerance;
        Self::new(
            name,
            pass,
            format!("value {value:.9e}, target {target:.9e}, tolerance {tolerance:.3e}"),
        )
    }

    /// `value <= bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound, format!("value {value:.6e}, bound {bound:.3e}"))
    }
}

/// Results of a task before they are written.
#[derive(Debug, Default)]
pub struct TaskOutput {
    pub checks: Vec<Check>,
    pub data: serde_json::Map<String, Value>,
    /// `(file suffix, contents)` pairs, written as `<name>.<suffix>.csv`.
    pub tables: Vec<(String, String)>,
}

impl TaskOutput {
    pub fn put(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.data.insert(key.to_string(), v);
    }

    pub fn table(&mut self, suffix: &str, header: &str, rows: impl IntoIterator<Item = String>) {
        let mut s = String::from(header);
        s.push('\n');
        for r in rows {
            s.push_str(&r);
            s.push('\n');
        }
        self.tables.push((suffix.to_string(), s));
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    name: &'a str,
    task: &'a str,
    seed: u64,
    status: &'static str,
    checks: &'a [Check],
    files: Vec<String>,
    results: &'a serde_json::Map<String, Value>,
}

/// Writes every table and `<name>.summary.json`; returns the summary path.
pub fn emit_report(
    dir: &Path,
    name: &str,
    task: &str,
    seed: u64,
    out: &TaskOutput,
) -> Result<PathBuf, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Output(format!("{}: {e}", p.display()));
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut files = Vec::new();
    for (suffix, text) in &out.tables {
        let file = format!("{name}.{suffix}.csv");
        let path = dir.join(&file);
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
        files.push(file);
    }
    let summary = Summary {
        name,
        task,
        seed,
        status: if out.passed() { "pass" } else { "fail" },
        checks: &out.checks,
        files,
        results: &out.data,
    };
    let path = dir.join(format!("{name}.summary.json"));
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| io(&path, e))?;
    Ok(path)
}

/// Fixed formatting for table cells.
pub fn num(v: f64) -> String {
    format!("{v:.12e}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}
