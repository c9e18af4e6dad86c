//! Matrix CSV format: a `rows,cols` header line followed by one line per
//! row of comma-separated decimals. Values are written in shortest
//! round-trip exponent form, so a write/read cycle is bit-exact.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};

pub fn matrix_to_csv(a: &DenseMatrix) -> String {
    let mut out = String::with_capacity(a.rows() * a.cols() * 24 + 16);
    out.push_str(&format!("{},{}\n", a.rows(), a.cols()));
    for i in 0..a.rows() {
        let line: Vec<String> = a.row(i).iter().map(|x| format!("{x:e}")).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<DenseMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split(',')
        .map(|t| t.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse(format!("line 1: bad header '{header}': {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse(format!(
            "line 1: expected 'rows,cols', got '{header}'"
        )));
    };

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (lineno, line) in lines {
        let values: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("line {lineno}: {e}")))?;
        if values.len() != cols {
            return Err(Error::Parse(format!(
                "line {lineno}: expected {cols} values, found {}",
                values.len()
            )));
        }
        data.extend(values);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse(format!("expected {rows} rows, found {seen}")));
    }
    DenseMatrix::new(rows, cols, data)
}

pub fn write_matrix_csv(path: &Path, a: &DenseMatrix) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(matrix_to_csv(a).as_bytes())?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DenseMatrix> {
    matrix_from_csv(&fs::read_to_string(path)?)
}
