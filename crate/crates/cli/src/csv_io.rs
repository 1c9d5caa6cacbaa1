//! Matrix CSV files. Missing cells (empty or `NaN`) load as `0.0` with mask
//! bit `0`; values are written with 17 significant digits so a save/load
//! round trip is bit-exact. Missing cells are written as `NaN` rather than
//! left empty: a one-column row with nothing observed would otherwise be a
//! blank line, which CSV readers skip.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use lowrank_core::{DenseMatrix, MaskMatrix};

use crate::CliError;

pub fn load_matrix_csv(path: &Path) -> Result<(DenseMatrix, MaskMatrix), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;

    let mut width = None;
    let mut values = Vec::new();
    let mut bits = Vec::new();
    let mut rows = 0;
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(CliError::RaggedRows {
                row: r,
                expected,
                got: record.len(),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                values.push(0.0);
                bits.push(0);
                continue;
            }
            let v: f64 = cell.parse().map_err(|_| CliError::UnparsableCell {
                row: r,
                col: c,
                text: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(CliError::UnparsableCell {
                    row: r,
                    col: c,
                    text: cell.to_string(),
                });
            }
            values.push(v);
            bits.push(1);
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    Ok((
        DenseMatrix::new(rows, cols, values)?,
        MaskMatrix::new(rows, cols, bits)?,
    ))
}

/// Writes `m`; unobserved cells (per `mask`) are written as `NaN`.
pub fn save_matrix_csv(path: &Path, m: &DenseMatrix, mask: Option<&MaskMatrix>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", path.display()));
    for i in 0..m.rows() {
        let line: Vec<String> = (0..m.cols())
            .map(|j| match mask {
                Some(mk) if !mk.is_observed(i, j) => "NaN".to_string(),
                _ => format!("{:.16e}", m.get(i, j)),
            })
            .collect();
        writeln!(w, "{}", line.join(",")).map_err(io)?;
    }
    w.flush().map_err(io)
}
