//! Small headed-CSV helpers shared by the feature, label and annotation files.

use std::io::Read;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("MissingColumn: {0}")]
    MissingColumn(String),
    #[error("UnparsableRow at line {line}: {message}")]
    UnparsableRow { line: u64, message: String },
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn parse_field<T: std::str::FromStr>(line: u64, name: &str, raw: &str) -> Result<T, TableError> {
    raw.trim().parse().map_err(|_| TableError::UnparsableRow {
        line,
        message: format!("{name} '{raw}' does not parse"),
    })
}

/// Hands each data row's `columns` (in the order given) to `f`, with the
/// row's 1-based line number.
pub(crate) fn for_each_row<R: Read>(
    input: R,
    columns: &[&str],
    mut f: impl FnMut(u64, &[&str]) -> Result<(), TableError>,
) -> Result<(), TableError> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);
    let headers = rdr
        .headers()
        .map_err(|e| TableError::UnparsableRow {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let idx: Vec<usize> = columns
        .iter()
        .map(|c| {
            headers
                .iter()
                .position(|h| h == *c)
                .ok_or_else(|| TableError::MissingColumn(c.to_string()))
        })
        .collect::<Result<_, _>>()?;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| TableError::UnparsableRow {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let fields: Vec<&str> = idx.iter().map(|&i| rec.get(i).unwrap_or("")).collect();
        f(line, &fields)?;
    }
    Ok(())
}
