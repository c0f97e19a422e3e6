//! Matrix Market coordinate I/O.
//!
//! Reads `matrix coordinate real` files with `general` or `symmetric`
//! symmetry. Symmetric storage is expanded to full storage on read (the
//! mirrored entry is added for every stored off-diagonal), duplicates are
//! summed, and indices are converted from the format's 1-based convention at
//! this boundary only — everything else in the crate is 0-based. Writing
//! always uses `general` symmetry and Rust's shortest round-trip float
//! formatting, so a write/read cycle reproduces values exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(PartialEq)]
enum Symmetry {
    General,
    Symmetric,
}

/// Reads a coordinate real matrix from `path`.
pub fn read_matrix_market(path: &Path) -> Result<SparseMatrix> {
    let file = File::open(path)?;
    read_from(BufReader::new(file))
}

/// Reads a coordinate real matrix from any buffered reader; split out from
/// the path-based entry point so tests can parse in-memory strings.
pub fn read_from<R: BufRead>(reader: R) -> Result<SparseMatrix> {
    let mut lines = reader.lines();

    let header = lines
        .next()
        .ok_or_else(|| Error::MatrixMarket("empty file".into()))??;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || !tokens[0].eq_ignore_ascii_case("%%MatrixMarket") {
        return Err(Error::MatrixMarket(format!("malformed header: {header}")));
    }
    if !tokens[1].eq_ignore_ascii_case("matrix") || !tokens[2].eq_ignore_ascii_case("coordinate") {
        return Err(Error::MatrixMarket(format!(
            "unsupported object/format: {} {}",
            tokens[1], tokens[2]
        )));
    }
    if !tokens[3].eq_ignore_ascii_case("real") {
        return Err(Error::MatrixMarket(format!(
            "unsupported field: {}",
            tokens[3]
        )));
    }
    let symmetry = if tokens[4].eq_ignore_ascii_case("general") {
        Symmetry::General
    } else if tokens[4].eq_ignore_ascii_case("symmetric") {
        Symmetry::Symmetric
    } else {
        return Err(Error::MatrixMarket(format!(
            "unsupported symmetry: {}",
            tokens[4]
        )));
    };

    // Size line: first non-comment, non-blank line after the header.
    let mut size_line = None;
    for line in lines.by_ref() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        size_line = Some(line);
        break;
    }
    let size_line = size_line.ok_or_else(|| Error::MatrixMarket("missing size line".into()))?;
    let dims: Vec<&str> = size_line.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(Error::MatrixMarket(format!(
            "malformed size line: {size_line}"
        )));
    }
    let nrows: usize = parse_token(dims[0], "row count")?;
    let ncols: usize = parse_token(dims[1], "column count")?;
    let declared_nnz: usize = parse_token(dims[2], "entry count")?;

    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(declared_nnz);
    let mut seen = 0usize;
    for line in lines {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(Error::MatrixMarket(format!("malformed entry: {trimmed}")));
        }
        let i: usize = parse_token(parts[0], "row index")?;
        let j: usize = parse_token(parts[1], "column index")?;
        let v: f64 = parts[2]
            .parse()
            .map_err(|_| Error::MatrixMarket(format!("bad value: {}", parts[2])))?;
        if i == 0 || j == 0 || i > nrows || j > ncols {
            return Err(Error::MatrixMarket(format!(
                "entry ({i}, {j}) out of range for {nrows} x {ncols}"
            )));
        }
        seen += 1;
        triplets.push((i - 1, j - 1, v));
        if symmetry == Symmetry::Symmetric && i != j {
            triplets.push((j - 1, i - 1, v));
        }
    }
    if seen != declared_nnz {
        return Err(Error::MatrixMarket(format!(
            "header declares {declared_nnz} entries, file has {seen}"
        )));
    }
    SparseMatrix::from_triplets(nrows, ncols, &triplets)
}

fn parse_token<T: std::str::FromStr>(token: &str, what: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::MatrixMarket(format!("bad {what}: {token}")))
}

/// Writes `matrix` in coordinate real general form.
pub fn write_matrix_market(matrix: &SparseMatrix, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_to(matrix, &mut w)
}

/// Writes to any sink; see [`write_matrix_market`].
pub fn write_to<W: Write>(matrix: &SparseMatrix, w: &mut W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(
        w,
        "{} {} {}",
        matrix.nrows(),
        matrix.ncols(),
        matrix.nnz()
    )?;
    for i in 0..matrix.nrows() {
        let (cols, vals) = matrix.row(i);
        for (&c, &v) in cols.iter().zip(vals) {
            // {:e} keeps the shortest digit string that round-trips to the
            // same f64, so read-after-write is exact.
            writeln!(w, "{} {} {:e}", i + 1, c + 1, v)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::XorShift64Star;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<SparseMatrix> {
        read_from(Cursor::new(text))
    }

    #[test]
    fn reads_general_coordinate_file() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real general\n\
             % a comment\n\
             2 3 3\n\
             1 1 1.5\n\
             2 3 -2\n\
             1 2 4e-1\n",
        )
        .unwrap();
        assert_eq!(m.nrows(), 2);
        assert_eq!(m.ncols(), 3);
        assert_eq!(m.get(0, 0), Some(1.5));
        assert_eq!(m.get(0, 1), Some(0.4));
        assert_eq!(m.get(1, 2), Some(-2.0));
    }

    #[test]
    fn expands_symmetric_storage() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real symmetric\n\
             3 3 3\n\
             1 1 2\n\
             2 1 -1\n\
             3 3 5\n",
        )
        .unwrap();
        assert_eq!(m.get(1, 0), Some(-1.0));
        assert_eq!(m.get(0, 1), Some(-1.0), "mirror entry added");
        assert_eq!(m.nnz(), 4);
    }

    #[test]
    fn sums_duplicate_entries() {
        let m = parse(
            "%%MatrixMarket matrix coordinate real general\n\
             1 1 2\n\
             1 1 1.0\n\
             1 1 2.0\n",
        )
        .unwrap();
        assert_eq!(m.get(0, 0), Some(3.0));
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(parse("%%MatrixMarket matrix array real general\n1 1\n1.0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 1 0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n").is_err());
        assert!(parse("%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n").is_err());
        assert!(parse("not a header\n").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let mut rng = XorShift64Star::new(99);
        let mut triplets = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                if rng.next_f64() < 0.2 {
                    // Scale across many binades to stress the formatter.
                    let v = rng.next_centered() * 10f64.powi((rng.next_f64() * 20.0) as i32 - 10);
                    triplets.push((i, j, v));
                }
            }
        }
        let m = SparseMatrix::from_triplets(20, 20, &triplets).unwrap();
        let mut buf = Vec::new();
        write_to(&m, &mut buf).unwrap();
        let back = read_from(Cursor::new(buf)).unwrap();
        assert_eq!(m.nrows(), back.nrows());
        assert_eq!(m.nnz(), back.nnz());
        for i in 0..20 {
            let (c0, v0) = m.row(i);
            let (c1, v1) = back.row(i);
            assert_eq!(c0, c1);
            for (a, b) in v0.iter().zip(v1) {
                assert_eq!(a.to_bits(), b.to_bits(), "value changed in round trip");
            }
        }
    }
}
