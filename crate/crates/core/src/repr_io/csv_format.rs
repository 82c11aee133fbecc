use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const LABEL_COLUMN: &str = "label";

pub(super) fn read(path: &Path) -> Result<(DMatrix<f64>, Vec<i64>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Format(format!("{}: bad csv header: {e}", path.display())))?
        .clone();
    let label_idx = headers
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| Error::Format(format!("{}: no `{LABEL_COLUMN}` column", path.display())))?;
    let d = headers.len() - 1;

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record
            .map_err(|e| Error::Format(format!("{}: row {}: {e}", path.display(), row + 1)))?;
        for (col, field) in record.iter().enumerate() {
            if col == label_idx {
                let label = field.parse::<i64>().map_err(|_| {
                    Error::Format(format!(
                        "{}: row {}: label `{field}` is not an integer",
                        path.display(),
                        row + 1
                    ))
                })?;
                labels.push(label);
            } else {
                let x = field.parse::<f64>().map_err(|_| {
                    Error::Format(format!(
                        "{}: row {}: `{field}` is not a number",
                        path.display(),
                        row + 1
                    ))
                })?;
                values.push(x);
            }
        }
    }
    Ok((DMatrix::from_row_slice(labels.len(), d, &values), labels))
}

/// Writes with 17 significant digits, enough to round-trip every f64.
pub(super) fn write(path: &Path, features: &DMatrix<f64>, labels: &[i64]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let (n, d) = features.shape();
    let mut line = String::new();
    for j in 0..d {
        line.push_str(&format!("f{j},"));
    }
    line.push_str(LABEL_COLUMN);
    writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    for i in 0..n {
        line.clear();
        for j in 0..d {
            line.push_str(&format!("{:.16e},", features[(i, j)]));
        }
        line.push_str(&labels[i].to_string());
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
