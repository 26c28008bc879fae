//! Report tables and their CSV / JSON rendering.
//!
//! Reals are rendered with 10 significant digits in scientific notation, in
//! both formats, so a report is a pure function of the computed values.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{Map, Number, Value};

use crate::config::Format;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    /// Rendered `;`-separated in CSV, as an array in JSON.
    List(Vec<f64>),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Real(x) => real(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::List(xs) => xs.iter().map(|&x| real(x)).collect::<Vec<_>>().join(";"),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Real(x) => json_real(*x),
            Cell::List(xs) => Value::Array(xs.iter().map(|&x| json_real(x)).collect()),
            Cell::Int(n) => Value::Number((*n).into()),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Bool(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

fn json_real(x: f64) -> Value {
    real(x)
        .parse::<f64>()
        .ok()
        .and_then(Number::from_f64)
        .map_or(Value::Null, Value::Number)
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Real(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Real)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

/// 10 significant digits; non-finite values as `nan`, `inf`, `-inf`.
pub fn real(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 {
        // no negative zero in reports
        "0.000000000e0".into()
    } else {
        format!("{x:.9e}")
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width");
        self.rows.push(row);
    }

    fn csv_into(&self, out: &mut String) {
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
    }

    fn json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let mut m = Map::new();
                    for (c, v) in self.columns.iter().zip(row) {
                        m.insert((*c).to_string(), v.json());
                    }
                    Value::Object(m)
                })
                .collect(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub experiment: &'static str,
    /// Resolved configuration, in a fixed key order.
    pub config: Vec<(&'static str, Cell)>,
    pub table: Table,
    /// Tidy plot data: one row per (tau, quantity) (and log strike for smiles).
    pub plot: Table,
    pub warnings: Vec<String>,
}

pub const PLOT_COLUMNS: [&str; 5] = ["tau", "k", "quantity", "value", "std_error"];

impl Report {
    pub fn all_pass(&self) -> bool {
        let Some(col) = self.table.columns.iter().position(|&c| c == "pass") else {
            return true;
        };
        self.table
            .rows
            .iter()
            .all(|r| !matches!(r[col], Cell::Bool(false)))
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => {
                let mut out = String::new();
                for (k, v) in &self.config {
                    out.push_str(&format!("# {k}={}\n", v.csv()));
                }
                self.table.csv_into(&mut out);
                out
            }
            Format::Json => {
                let mut config = Map::new();
                for (k, v) in &self.config {
                    config.insert((*k).to_string(), v.json());
                }
                let mut root = Map::new();
                root.insert("experiment".into(), Value::String(self.experiment.into()));
                root.insert("config".into(), Value::Object(config));
                root.insert(
                    "columns".into(),
                    Value::Array(
                        self.table
                            .columns
                            .iter()
                            .map(|c| Value::String((*c).into()))
                            .collect(),
                    ),
                );
                root.insert("rows".into(), self.table.json_rows());
                root.insert("all_pass".into(), Value::Bool(self.all_pass()));
                let mut s = serde_json::to_string_pretty(&Value::Object(root))
                    .expect("serializing a JSON value cannot fail");
                s.push('\n');
                s
            }
        }
    }

    pub fn render_plot(&self) -> String {
        let mut out = String::new();
        self.plot.csv_into(&mut out);
        out
    }
}

#[derive(Debug, thiserror::Error)]
#[error("cannot write {path}: {source}")]
pub struct WriteError {
    pub path: PathBuf,
    pub source: std::io::Error,
}

fn target_dir(path: &Path) -> &Path {
    match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    }
}

/// Checks up front that a report can be created at `path`, leaving nothing behind.
pub fn check_writable(path: &Path) -> Result<(), WriteError> {
    let err = |source| WriteError {
        path: path.to_path_buf(),
        source,
    };
    if path.is_dir() {
        return Err(err(std::io::Error::other("is a directory")));
    }
    tempfile::NamedTempFile::new_in(target_dir(path))
        .map(drop)
        .map_err(err)
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial report.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), WriteError> {
    let err = |source| WriteError {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(target_dir(path)).map_err(err)?;
    tmp.write_all(contents.as_bytes()).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_significant_digits() {
        assert_eq!(real(-0.105), "-1.050000000e-1");
        assert_eq!(real(1.0 / 3.0), "3.333333333e-1");
        assert_eq!(real(-0.0), "0.000000000e0");
        assert_eq!(real(f64::NAN), "nan");
        assert_eq!(real(12345.678901234), "1.234567890e4");
    }

    fn sample() -> Report {
        let mut table = Table::new(&["quantity", "value", "pass"]);
        table.push(vec!["a".into(), 0.5.into(), true.into()]);
        table.push(vec!["b".into(), Cell::Empty, false.into()]);
        Report {
            experiment: "price",
            config: vec![("seed", Cell::Int(7)), ("rho", Cell::Real(-0.7))],
            table,
            plot: Table::new(&PLOT_COLUMNS),
            warnings: vec![],
        }
    }

    #[test]
    fn csv_layout() {
        let r = sample();
        assert!(!r.all_pass());
        assert_eq!(
            r.render(Format::Csv),
            "# seed=7\n# rho=-7.000000000e-1\nquantity,value,pass\na,5.000000000e-1,true\nb,,false\n"
        );
    }

    #[test]
    fn json_keeps_column_order() {
        let s = sample().render(Format::Json);
        let v: Value = serde_json::from_str(&s).unwrap();
        let keys: Vec<&String> = v["rows"][0].as_object().unwrap().keys().collect();
        assert_eq!(keys, ["quantity", "value", "pass"]);
        assert_eq!(v["rows"][1]["value"], Value::Null);
        assert_eq!(v["config"]["rho"], serde_json::json!(-0.7));
        assert_eq!(v["all_pass"], Value::Bool(false));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        write_atomic(&p, "one\n").unwrap();
        write_atomic(&p, "two\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two\n");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        assert!(write_atomic(&dir.path().join("missing/r.csv"), "x").is_err());
        assert!(check_writable(&dir.path().join("missing/r.csv")).is_err());
        assert!(check_writable(dir.path()).is_err());
        assert!(check_writable(&dir.path().join("new.csv")).is_ok());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
