//! Matrix CSV files: a first line `rows,cols` followed by one line per row.
//! Values are written in shortest round-trip form.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Result, RrrError};
use crate::matrix::DataMatrix;

pub fn write_matrix<W: Write>(mut out: W, m: &DataMatrix) -> Result<()> {
    writeln!(out, "{},{}", m.rows(), m.cols())?;
    let mut line = String::new();
    for i in 0..m.rows() {
        line.clear();
        for j in 0..m.cols() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&m.get(i, j).to_string());
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn write_matrix_file(path: &Path, m: &DataMatrix) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_matrix(&mut f, m)?;
    f.flush()?;
    Ok(())
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim()
        .parse()
        .map_err(|_| RrrError::ShapeError(format!("bad {what} in matrix header: {s:?}")))
}

pub fn read_matrix<R: Read>(input: R) -> Result<DataMatrix> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| RrrError::ShapeError("empty matrix file".into()))??;
    let (r, c) = header
        .split_once(',')
        .ok_or_else(|| RrrError::ShapeError(format!("matrix header must be rows,cols: {header:?}")))?;
    let (rows, cols) = (parse_usize(r, "rows")?, parse_usize(c, "cols")?);
    let mut entries = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        seen += 1;
        let before = entries.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| RrrError::InvalidMatrix(format!("row {seen}: bad number {field:?}")))?;
            entries.push(v);
        }
        if entries.len() - before != cols {
            return Err(RrrError::ShapeError(format!(
                "row {seen} has {} values, header says {cols}",
                entries.len() - before
            )));
        }
    }
    if seen != rows {
        return Err(RrrError::ShapeError(format!("found {seen} rows, header says {rows}")));
    }
    DataMatrix::from_row_major(rows, cols, entries)
}

pub fn read_matrix_file(path: &Path) -> Result<DataMatrix> {
    read_matrix(std::fs::File::open(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let m = DataMatrix::from_row_major(2, 3, vec![0.1, -2.5e-300, 1.0 / 3.0, 7.0, 0.0, 1e17]).unwrap();
        let mut buf = Vec::new();
        write_matrix(&mut buf, &m).unwrap();
        assert!(buf.starts_with(b"2,3\n"));
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn malformed_inputs() {
        assert!(read_matrix("".as_bytes()).is_err());
        assert!(read_matrix("2,2\n1,2\n".as_bytes()).is_err());
        assert!(read_matrix("1,2\n1,2,3\n".as_bytes()).is_err());
        assert!(read_matrix("1,1\nNaN\n".as_bytes()).is_err());
        assert!(read_matrix("x,1\n1\n".as_bytes()).is_err());
    }
}
