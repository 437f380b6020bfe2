//! Fixed-precision CSV emit and a small reader for the files this crate
//! writes itself. Fixed formatting keeps re-runs byte-identical, which the
//! manifest hashes and the golden tests rely on.

use std::path::Path;

use crate::CliError;

/// One number cell: scientific with 9 significant decimals, enough to
/// round-trip the physics while keeping bytes independent of locale or
/// formatting defaults.
pub fn cell(v: f64) -> String {
    format!("{v:.9e}")
}

pub fn write_csv(columns: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    out.push_str(&columns.join(","));
    out.push('\n');
    for row in rows {
        debug_assert_eq!(row.len(), columns.len());
        let line: Vec<String> = row.iter().map(|v| cell(*v)).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

/// Parse a numeric CSV produced by this toolkit: one header line, then rows
/// of floats. Non-numeric cells fail loudly.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_csv(&text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty file")?;
    let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut row = Vec::with_capacity(columns.len());
        for cell in line.split(',') {
            row.push(
                cell.trim()
                    .parse::<f64>()
                    .map_err(|e| format!("line {}: {e}", ln + 2))?,
            );
        }
        if row.len() != columns.len() {
            return Err(format!("line {}: {} cells, expected {}", ln + 2, row.len(), columns.len()));
        }
        rows.push(row);
    }
    Ok((columns, rows))
}
