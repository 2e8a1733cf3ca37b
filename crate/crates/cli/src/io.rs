//! Deterministic CSV/JSON writing and the matching readers.
//!
//! CSV dialect: comma separators, `.` decimal point, `#`-prefixed
//! `key: value` metadata lines, then one column-name row, then data rows.
//! All floats print with 12 significant digits, so identical configs
//! produce byte-identical files and every file parses back losslessly at
//! the printed precision.

use std::fs;
use std::path::Path;

use crate::AppError;

/// 12 significant digits, scientific. The fixed width keeps output
/// deterministic across platforms.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

pub fn parse_float(s: &str) -> Result<f64, AppError> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => s
            .parse::<f64>()
            .map_err(|_| AppError::runtime(format!("unparseable float {s:?}"))),
    }
}

/// A CSV payload: metadata, column names, and stringified cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(meta: Vec<(String, String)>, columns: &[&str]) -> Self {
        Self {
            meta,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<(), AppError> {
        fs::write(path, self.render())
            .map_err(|e| AppError::runtime(format!("writing {}: {e}", path.display())))
    }

    pub fn read(path: &Path) -> Result<Self, AppError> {
        let text = fs::read_to_string(path)
            .map_err(|e| AppError::runtime(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, AppError> {
        let mut meta = Vec::new();
        let mut columns = Vec::new();
        let mut rows = Vec::new();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim_start();
                match rest.split_once(':') {
                    Some((k, v)) => meta.push((k.trim().to_string(), v.trim().to_string())),
                    None => return Err(AppError::runtime(format!("bad metadata line {line:?}"))),
                }
            } else if columns.is_empty() {
                columns = line.split(',').map(|c| c.to_string()).collect();
            } else if !line.is_empty() {
                let cells: Vec<String> = line.split(',').map(|c| c.to_string()).collect();
                if cells.len() != columns.len() {
                    return Err(AppError::runtime(format!(
                        "row has {} cells, expected {}",
                        cells.len(),
                        columns.len()
                    )));
                }
                rows.push(cells);
            }
        }
        if columns.is_empty() {
            return Err(AppError::runtime("no column header found".into()));
        }
        Ok(Self { meta, columns, rows })
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// All cells of a named column parsed as floats.
    pub fn float_column(&self, name: &str) -> Result<Vec<f64>, AppError> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| AppError::runtime(format!("no column {name:?}")))?;
        self.rows.iter().map(|r| parse_float(&r[idx])).collect()
    }
}

/// Standard tool-identification metadata rows.
pub fn tool_meta(command: &str) -> Vec<(String, String)> {
    vec![
        ("tool".into(), format!("stabsense {}", env!("CARGO_PKG_VERSION"))),
        ("command".into(), command.into()),
    ]
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), AppError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| AppError::runtime(format!("serializing json: {e}")))?;
    text.push('\n');
    fs::write(path, text)
        .map_err(|e| AppError::runtime(format!("writing {}: {e}", path.display())))
}

/// JSON number that tolerates infinities by substituting null.
pub fn json_float(x: f64) -> serde_json::Value {
    if x.is_finite() {
        serde_json::json!(x)
    } else {
        serde_json::Value::Null
    }
}
