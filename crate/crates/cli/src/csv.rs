//! Numeric CSV ingestion and output.

use std::fmt::Write as _;
use std::path::Path;

use depthwl::DataMatrix;

/// Reads comma-separated reals. A first line with any non-numeric field is
/// taken as a header. Blank lines are skipped.
pub fn read_matrix(path: &Path) -> Result<DataMatrix, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_matrix(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn parse_matrix(text: &str) -> Result<DataMatrix, String> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Vec<Option<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        if idx == 0 && parsed.iter().any(Option::is_none) {
            continue;
        }
        let mut row = Vec::with_capacity(fields.len());
        for (k, (v, raw)) in parsed.iter().zip(&fields).enumerate() {
            match v {
                Some(x) if x.is_finite() => row.push(*x),
                _ => {
                    return Err(format!(
                        "line {lineno}: field {} ({raw:?}) is not a finite number",
                        k + 1
                    ))
                }
            }
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(format!("line {lineno}: expected {w} fields, found {}", row.len()));
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    DataMatrix::from_rows(&rows).map_err(|e| e.to_string())
}

pub fn depths_csv(depths: &[f64]) -> String {
    let mut out = String::from("row_index,depth\n");
    for (i, d) in depths.iter().enumerate() {
        let _ = writeln!(out, "{i},{d}");
    }
    out
}
