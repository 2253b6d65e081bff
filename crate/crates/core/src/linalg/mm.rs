//! Matrix Market coordinate (sparse symmetric) and array (dense vector) I/O.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};

use super::sparse::{CsrMatrix, SymSparseMatrix};
use super::LinalgError;

fn fmt_err(line: usize, msg: impl Into<String>) -> LinalgError {
    LinalgError::Format { line, msg: msg.into() }
}

/// Data lines (1-based line number, trimmed text), skipping comments and blanks.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('%'))
}

fn parse<T: std::str::FromStr>(tok: Option<&str>, line: usize, what: &str) -> Result<T, LinalgError> {
    tok.ok_or_else(|| fmt_err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| fmt_err(line, format!("bad {what}")))
}

/// Reads a real coordinate matrix. `symmetric` files store one triangle;
/// `general` files must hold a symmetric matrix.
pub fn read_sym_matrix<R: Read>(reader: R) -> Result<SymSparseMatrix, LinalgError> {
    let mut text = String::new();
    BufReader::new(reader).read_to_string(&mut text)?;
    let header = text.lines().next().ok_or_else(|| fmt_err(1, "empty file"))?;
    let h: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if h.len() < 5 || h[0] != "%%matrixmarket" || h[1] != "matrix" {
        return Err(fmt_err(1, "missing %%MatrixMarket matrix header"));
    }
    if h[2] != "coordinate" {
        return Err(fmt_err(1, "only coordinate matrices are supported"));
    }
    if h[3] != "real" && h[3] != "integer" {
        return Err(fmt_err(1, format!("unsupported field '{}'", h[3])));
    }
    let symmetric = match h[4].as_str() {
        "symmetric" => true,
        "general" => false,
        other => return Err(fmt_err(1, format!("unsupported symmetry '{other}'"))),
    };
    let mut lines = data_lines(&text);
    let (sl, size) = lines.next().ok_or_else(|| fmt_err(1, "missing size line"))?;
    let mut it = size.split_whitespace();
    let nr: usize = parse(it.next(), sl, "row count")?;
    let nc: usize = parse(it.next(), sl, "column count")?;
    let nnz: usize = parse(it.next(), sl, "entry count")?;
    if nr != nc {
        return Err(fmt_err(sl, "matrix is not square"));
    }
    let mut t = Vec::with_capacity(nnz);
    let mut count = 0;
    for (ln, l) in lines {
        let mut it = l.split_whitespace();
        let i: usize = parse(it.next(), ln, "row index")?;
        let j: usize = parse(it.next(), ln, "column index")?;
        let v: f64 = parse(it.next(), ln, "value")?;
        if i == 0 || j == 0 || i > nr || j > nc {
            return Err(fmt_err(ln, "index out of range"));
        }
        if symmetric && i < j {
            return Err(fmt_err(ln, "symmetric file with upper-triangle entry"));
        }
        t.push((i - 1, j - 1, v));
        count += 1;
    }
    if count != nnz {
        return Err(fmt_err(0, format!("expected {nnz} entries, found {count}")));
    }
    if symmetric {
        return Ok(SymSparseMatrix::from_triangle(nr, &t));
    }
    let m = CsrMatrix::from_triplets(nr, nr, &t);
    if !m.is_symmetric(0.0) {
        return Err(fmt_err(0, "matrix is not symmetric"));
    }
    Ok(SymSparseMatrix::symmetrized(m))
}

/// Writes the lower triangle in `coordinate real symmetric` format with 17
/// significant digits.
pub fn write_sym_matrix<W: Write>(m: &SymSparseMatrix, mut w: W) -> Result<(), LinalgError> {
    let mut lower = Vec::new();
    for i in 0..m.n() {
        let (cols, vals) = m.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j <= i {
                lower.push((i, j, v));
            }
        }
    }
    let mut s = String::new();
    writeln!(s, "%%MatrixMarket matrix coordinate real symmetric").unwrap();
    writeln!(s, "{} {} {}", m.n(), m.n(), lower.len()).unwrap();
    for (i, j, v) in lower {
        writeln!(s, "{} {} {:.16e}", i + 1, j + 1, v).unwrap();
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads a dense column vector (`array real general`, one column).
pub fn read_vector<R: Read>(reader: R) -> Result<Vec<f64>, LinalgError> {
    let mut text = String::new();
    BufReader::new(reader).read_to_string(&mut text)?;
    let header = text.lines().next().unwrap_or("").to_ascii_lowercase();
    if !header.starts_with("%%matrixmarket matrix array") {
        return Err(fmt_err(1, "missing %%MatrixMarket matrix array header"));
    }
    let mut lines = data_lines(&text);
    let (sl, size) = lines.next().ok_or_else(|| fmt_err(1, "missing size line"))?;
    let mut it = size.split_whitespace();
    let n: usize = parse(it.next(), sl, "row count")?;
    let c: usize = parse(it.next(), sl, "column count")?;
    if c != 1 {
        return Err(fmt_err(sl, "expected a single column"));
    }
    let mut v = Vec::with_capacity(n);
    for (ln, l) in lines {
        v.push(parse(Some(l), ln, "value")?);
    }
    if v.len() != n {
        return Err(fmt_err(0, format!("expected {n} values, found {}", v.len())));
    }
    Ok(v)
}

pub fn write_vector<W: Write>(v: &[f64], mut w: W) -> Result<(), LinalgError> {
    let mut s = String::new();
    writeln!(s, "%%MatrixMarket matrix array real general").unwrap();
    writeln!(s, "{} 1", v.len()).unwrap();
    for x in v {
        writeln!(s, "{x:.16e}").unwrap();
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Writes a dense matrix in `array real general` format (column-major).
pub fn write_dense<W: Write>(m: &nalgebra::DMatrix<f64>, mut w: W) -> Result<(), LinalgError> {
    let mut s = String::new();
    writeln!(s, "%%MatrixMarket matrix array real general").unwrap();
    writeln!(s, "{} {}", m.nrows(), m.ncols()).unwrap();
    for x in m.iter() {
        writeln!(s, "{x:.16e}").unwrap();
    }
    w.write_all(s.as_bytes())?;
    Ok(())
}

/// Lines of `path` as a buffered reader; shared by the text-format readers.
pub fn open_lines(path: &std::path::Path) -> Result<Vec<String>, LinalgError> {
    let f = std::fs::File::open(path)?;
    Ok(BufReader::new(f).lines().collect::<Result<_, _>>()?)
}
