//! Plain comma-separated numeric tables.

use std::io::{Read, Write};
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// A parsed table with its optional header row.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Option<Vec<String>>,
    pub data: Dataset,
}

fn is_numeric(cell: &str) -> bool {
    cell.trim().parse::<f64>().is_ok()
}

/// Parses a table. The first record is a header when any of its cells is not
/// a number. Lines and columns in errors are 1-based.
pub fn parse_csv<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut header = None;
    let mut width: Option<usize> = None;
    let mut values = Vec::new();
    let mut first = true;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            Error::Csv { line, column: 0, message: e.to_string() }
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if first {
            first = false;
            if !rec.iter().all(is_numeric) {
                header = Some(rec.iter().map(str::to_string).collect::<Vec<_>>());
                width = Some(rec.len());
                continue;
            }
        }
        match width {
            Some(w) if w != rec.len() => {
                return Err(Error::Csv {
                    line,
                    column: rec.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", rec.len()),
                })
            }
            _ => width = Some(rec.len()),
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Csv {
                line,
                column: c + 1,
                message: format!("not a number: {cell:?}"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv { line, column: c + 1, message: format!("non-finite value {cell:?}") });
            }
            values.push(v);
        }
    }
    let dim = width.unwrap_or(0);
    if dim == 0 {
        return Err(Error::Csv { line: 1, column: 1, message: "no columns".into() });
    }
    let data = if values.is_empty() { Dataset::empty(dim) } else { Dataset::from_flat(dim, values)? };
    Ok(Table { header, data })
}

pub fn read_csv(path: &Path) -> Result<Table> {
    parse_csv(std::fs::File::open(path)?)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() && v != 0.0 && (v.abs() < 1e-5 || v.abs() >= 1e16) {
        format!("{v:e}")
    } else {
        format!("{v}")
    }
}

/// Writes a header and numeric rows.
pub fn write_csv<W: Write, R: AsRef<[f64]>>(out: W, header: &[String], rows: &[R]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header).map_err(csv_io)?;
    for row in rows {
        w.write_record(row.as_ref().iter().map(|&v| format_f64(v))).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Io(std::io::Error::other(format!("{other:?}"))),
    }
}

/// Default column names `x1..xp`.
pub fn coordinate_names(p: usize) -> Vec<String> {
    (1..=p).map(|i| format!("x{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_is_detected() {
        let t = parse_csv("a,b\n1,2\n3.5,-4e-3\n".as_bytes()).unwrap();
        assert_eq!(t.header, Some(vec!["a".to_string(), "b".to_string()]));
        assert_eq!(t.data.len(), 2);
        assert_eq!(t.data.row(1), &[3.5, -4e-3]);
        let t = parse_csv("1, 2\n3,4".as_bytes()).unwrap();
        assert!(t.header.is_none());
        assert_eq!(t.data.row(0), &[1.0, 2.0]);
    }

    #[test]
    fn header_only_is_empty() {
        let t = parse_csv("x1\n".as_bytes()).unwrap();
        assert!(t.data.is_empty());
        assert_eq!(t.data.dim(), 1);
    }

    #[test]
    fn errors_name_line_and_column() {
        match parse_csv("x,y\n1,2\n3,abc\n".as_bytes()) {
            Err(Error::Csv { line, column, .. }) => assert_eq!((line, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        match parse_csv("1,2\n3\n".as_bytes()) {
            Err(Error::Csv { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_csv("1,inf\n".as_bytes()).is_err());
        assert!(parse_csv("".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn values_round_trip(vals in prop::collection::vec(-1e300f64..1e300, 1..40), tiny in -1e-300f64..1e-300) {
            let mut vals = vals;
            vals.push(tiny);
            vals.push(0.1 + 0.2);
            let rows: Vec<Vec<f64>> = vals.iter().map(|&v| vec![v]).collect();
            let mut buf = Vec::new();
            write_csv(&mut buf, &coordinate_names(1), &rows).unwrap();
            let t = parse_csv(&buf[..]).unwrap();
            prop_assert_eq!(t.data.as_flat(), &vals[..]);
        }
    }
}
