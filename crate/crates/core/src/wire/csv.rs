use std::io::{Read, Write};
use std::path::Path;

use super::{RawSample, RawSampleStream, Source, Units, WireError};

const COLUMNS: [&str; 4] = ["timestamp_ms", "ax", "ay", "az"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CsvMode {
    /// First malformed row aborts the read.
    #[default]
    Strict,
    /// Malformed rows are skipped and reported alongside the stream.
    Lenient,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct CsvRead {
    pub stream: RawSampleStream,
    pub row_errors: Vec<RowError>,
}

/// Reads a `timestamp_ms,ax,ay,az` file whose axis values are in `units`.
pub fn read_csv(path: impl AsRef<Path>, units: Units, mode: CsvMode) -> Result<CsvRead, WireError> {
    let file = std::fs::File::open(path)?;
    read_csv_from(file, units, mode)
}

pub fn read_csv_from<R: Read>(reader: R, units: Units, mode: CsvMode) -> Result<CsvRead, WireError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| WireError::UnparsableRow {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let mut idx = [0usize; 4];
    for (slot, name) in idx.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| WireError::MissingColumn(name.to_string()))?;
    }

    let mut stream = RawSampleStream::new(Source::Csv, units);
    let mut row_errors = Vec::new();
    for record in rdr.records() {
        let parsed = match record {
            Ok(rec) => {
                let line = rec.position().map_or(0, |p| p.line());
                parse_row(&rec, &idx).map_err(|message| RowError { line, message })
            }
            Err(e) => Err(RowError {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            }),
        };
        match parsed {
            Ok(sample) => stream.samples.push(sample),
            Err(err) if mode == CsvMode::Strict => {
                return Err(WireError::UnparsableRow {
                    line: err.line,
                    message: err.message,
                })
            }
            Err(err) => {
                log::warn!("skipping line {}: {}", err.line, err.message);
                row_errors.push(err);
            }
        }
    }
    Ok(CsvRead { stream, row_errors })
}

fn parse_row(rec: &csv::StringRecord, idx: &[usize; 4]) -> Result<RawSample, String> {
    let field = |i: usize| rec.get(idx[i]).ok_or_else(|| format!("missing {}", COLUMNS[i]));
    let ts_raw = field(0)?;
    let timestamp_ms: u32 = ts_raw
        .parse()
        .map_err(|_| format!("timestamp_ms '{ts_raw}' is not an unsigned integer"))?;
    let mut axes = [0.0; 3];
    for (k, axis) in axes.iter_mut().enumerate() {
        let raw = field(k + 1)?;
        *axis = raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("{} '{raw}' is not a number", COLUMNS[k + 1]))?;
    }
    Ok(RawSample {
        node_id: 0,
        timestamp_ms,
        axes,
    })
}

/// Writes the stream in the same schema [`read_csv`] accepts. Values use the
/// shortest representation that parses back to the identical `f64`.
pub fn write_csv<W: Write>(mut out: W, stream: &RawSampleStream) -> std::io::Result<()> {
    writeln!(out, "{}", COLUMNS.join(","))?;
    for s in &stream.samples {
        writeln!(
            out,
            "{},{},{},{}",
            s.timestamp_ms, s.axes[0], s.axes[1], s.axes[2]
        )?;
    }
    out.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, mode: CsvMode) -> Result<CsvRead, WireError> {
        read_csv_from(text.as_bytes(), Units::Mv, mode)
    }

    #[test]
    fn three_rows_in_order() {
        let r = read("timestamp_ms,ax,ay,az\n0,1,2,3\n20,4,5,6\n40,7,8,9\n", CsvMode::Strict).unwrap();
        assert_eq!(r.stream.len(), 3);
        assert_eq!(r.stream.samples[2].axes, [7.0, 8.0, 9.0]);
        assert_eq!(r.stream.samples[1].timestamp_ms, 20);
    }

    #[test]
    fn header_only_is_empty() {
        let r = read("timestamp_ms,ax,ay,az\n", CsvMode::Strict).unwrap();
        assert!(r.stream.is_empty());
        assert!(r.row_errors.is_empty());
    }

    #[test]
    fn missing_column() {
        let err = read("timestamp_ms,ax,ay\n0,1,2\n", CsvMode::Strict).unwrap_err();
        assert!(matches!(err, WireError::MissingColumn(c) if c == "az"));
    }

    #[test]
    fn bad_row_strict_vs_lenient() {
        let text = "timestamp_ms,ax,ay,az\n0,1,2,3\n20,abc,5,6\n40,7,8,9\n";
        let err = read(text, CsvMode::Strict).unwrap_err();
        assert!(matches!(err, WireError::UnparsableRow { line: 3, .. }), "{err:?}");
        let r = read(text, CsvMode::Lenient).unwrap();
        assert_eq!(r.stream.len(), 2);
        assert_eq!(r.row_errors.len(), 1);
        assert_eq!(r.row_errors[0].line, 3);
    }

    #[test]
    fn write_then_read_is_lossless() {
        let mut s = RawSampleStream::new(Source::Synthetic, Units::G);
        for i in 0..50u32 {
            let t = i as f64 * 0.1;
            s.samples.push(RawSample {
                node_id: 0,
                timestamp_ms: i * 20,
                axes: [t.sin() / 3.0, -t.cos() * 1e-7, 1.0 + t.exp()],
            });
        }
        let mut buf = Vec::new();
        write_csv(&mut buf, &s).unwrap();
        let back = read_csv_from(buf.as_slice(), Units::G, CsvMode::Strict).unwrap();
        assert_eq!(back.stream.samples, s.samples);
    }
}
