//! Dataset and manifest serialization.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use plaquette::observables::SweepResult;
use serde::Serialize;

use crate::CliError;

/// CSV text: header row, then one line per row. Floats carry 17
/// significant digits, integer columns print as integers, LF endings.
pub fn csv_text(table: &SweepResult) -> String {
    let mut out = String::new();
    let header: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in &table.rows {
        for (k, (v, col)) in row.iter().zip(&table.columns).enumerate() {
            if k > 0 {
                out.push(',');
            }
            write_number(&mut out, *v, col.integer);
        }
        out.push('\n');
    }
    out
}

fn write_number(out: &mut String, v: f64, integer: bool) {
    if v.is_nan() {
        out.push_str("NaN");
    } else if integer && v.fract() == 0.0 && v.abs() < 1e15 {
        let _ = write!(out, "{}", v as i64);
    } else {
        let _ = write!(out, "{v:.16e}");
    }
}

pub fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("writing {}: {e}", path.display())))?;
    Ok(path)
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable");
    text.push('\n');
    write_file(dir, name, text.as_bytes())
}
