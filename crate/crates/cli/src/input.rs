// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reading sequences and covariance matrices from CSV files.

use std::path::Path;

use optseg::{Covariance, DenseMatrix};

use crate::CliError;

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn parse_field(path: &Path, line: u64, field: &str) -> Result<f64, CliError> {
    field
        .parse::<f64>()
        .map_err(|_| CliError::Io(format!("{}: line {line}: cannot parse {field:?} as a number", path.display())))
}

/// One numeric column; a non-numeric first row is taken as a header.
pub fn read_sequence(path: &Path) -> Result<Vec<f64>, CliError> {
    let mut values = Vec::new();
    for (i, rec) in reader(path)?.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let line = record_line(&rec);
        if rec.len() != 1 {
            return Err(CliError::Io(format!(
                "{}: line {line}: expected one column, found {}",
                path.display(),
                rec.len()
            )));
        }
        let field = &rec[0];
        if i == 0 && field.parse::<f64>().is_err() {
            continue;
        }
        values.push(parse_field(path, line, field)?);
    }
    Ok(values)
}

/// Square matrix without a header, one row per line.
pub fn read_covariance(path: &Path) -> Result<Covariance, CliError> {
    let mut rows = Vec::new();
    for rec in reader(path)?.records() {
        let rec = rec.map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let line = record_line(&rec);
        rows.push(rec.iter().map(|f| parse_field(path, line, f)).collect::<Result<Vec<_>, _>>()?);
    }
    Ok(Covariance::Dense(DenseMatrix::from_rows(rows)?))
}
