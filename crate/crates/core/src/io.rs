//! CSV formats: sequences (`i,x,y`) and error curves (`n,kappa,error`).

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::CurveRow;
use crate::measures::{MeasureError, SampleSequence};

#[derive(Debug, Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("row {row}: expected index {expected}, found {found}")]
    BadIndex { row: usize, expected: usize, found: usize },
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

#[derive(Serialize, Deserialize)]
struct PairRow {
    i: usize,
    x: f64,
    y: f64,
}

pub fn write_sequence<W: Write>(w: W, pairs: &[(f64, f64)]) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    for (idx, &(x, y)) in pairs.iter().enumerate() {
        out.serialize(PairRow { i: idx + 1, x, y })?;
    }
    if pairs.is_empty() {
        out.write_record(["i", "x", "y"])?;
    }
    out.flush()?;
    Ok(())
}

/// Reads `i,x,y` rows; indices must run 1, 2, 3, ...
pub fn read_sequence<R: Read>(r: R) -> Result<SampleSequence, IoError> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut pairs = Vec::new();
    for (row, rec) in rdr.deserialize::<PairRow>().enumerate() {
        let rec = rec?;
        if rec.i != row + 1 {
            return Err(IoError::BadIndex {
                row: row + 1,
                expected: row + 1,
                found: rec.i,
            });
        }
        pairs.push((rec.x, rec.y));
    }
    Ok(SampleSequence::new(pairs)?)
}

pub fn write_sequence_file(path: impl AsRef<Path>, pairs: &[(f64, f64)]) -> Result<(), IoError> {
    write_sequence(File::create(path)?, pairs)
}

pub fn read_sequence_file(path: impl AsRef<Path>) -> Result<SampleSequence, IoError> {
    read_sequence(File::open(path)?)
}

pub fn write_curve<W: Write>(w: W, rows: &[CurveRow]) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    if rows.is_empty() {
        out.write_record(["n", "kappa", "error"])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_curve<R: Read>(r: R) -> Result<Vec<CurveRow>, IoError> {
    let mut rdr = csv::Reader::from_reader(r);
    Ok(rdr.deserialize().collect::<Result<_, _>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_round_trip() {
        let pairs = vec![(0.1, 1.0), (-1.0 / 3.0, 0.0), (1e-300, -2.5)];
        let mut buf = Vec::new();
        write_sequence(&mut buf, &pairs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("i,x,y\n1,0.1,1.0\n"), "{text}");
        let back = read_sequence(buf.as_slice()).unwrap();
        assert_eq!(back.pairs(), pairs.as_slice());
    }

    #[test]
    fn empty_sequence_keeps_header() {
        let mut buf = Vec::new();
        write_sequence(&mut buf, &[]).unwrap();
        assert_eq!(buf, b"i,x,y\n");
        assert!(read_sequence(buf.as_slice()).unwrap().is_empty());
    }

    #[test]
    fn index_gaps_are_rejected() {
        let text = "i,x,y\n1,0.5,1\n3,0.2,0\n";
        assert!(matches!(
            read_sequence(text.as_bytes()),
            Err(IoError::BadIndex { found: 3, .. })
        ));
    }

    #[test]
    fn curve_round_trip() {
        let rows = vec![
            CurveRow { n: 1, kappa: 0, error: 0.25 },
            CurveRow { n: 2, kappa: 1, error: 1.0 / 7.0 },
        ];
        let mut buf = Vec::new();
        write_curve(&mut buf, &rows).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("n,kappa,error\n"));
        assert_eq!(read_curve(buf.as_slice()).unwrap(), rows);
    }
}
