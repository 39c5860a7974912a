//! CSV writing and parsing: header row, UTF-8, '.' decimal separator, 17
//! significant digits so every value round-trips bit-exactly, atomic file
//! replacement (temp + rename).

use crate::CliError;
use std::fs;
use std::path::Path;

/// 17 significant digits; round-trips any f64 exactly and is locale-free.
pub fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        CsvTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.header.join(","));
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn write_atomic(&self, path: &Path) -> Result<(), CliError> {
        write_atomic(path, &self.render())
    }
}

pub fn write_atomic(path: &Path, content: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| CliError::config(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, content)
        .map_err(|e| CliError::config(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path)
        .map_err(|e| CliError::config(format!("cannot rename to {}: {e}", path.display())))?;
    Ok(())
}

/// Parsed CSV with header lookup.
pub struct ParsedCsv {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::config(format!("{}: empty file", path.display())))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if fields.len() != header.len() {
                return Err(CliError::config(format!(
                    "{} line {}: {} fields, header has {}",
                    path.display(),
                    i + 2,
                    fields.len(),
                    header.len()
                )));
            }
            rows.push(fields);
        }
        Ok(ParsedCsv { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, CliError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::config(format!("missing column `{name}`")))
    }

    pub fn value(&self, row: &[String], col: usize) -> Result<f64, CliError> {
        row[col]
            .parse::<f64>()
            .map_err(|e| CliError::config(format!("bad number `{}`: {e}", row[col])))
    }
}
