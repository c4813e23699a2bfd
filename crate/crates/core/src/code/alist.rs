//! Reader and writer for the alist sparse-matrix format.
//!
//! Layout (whitespace separated decimal integers, one record per line):
//!
//! ```text
//! n m                       columns, rows
//! max_col_deg max_row_deg
//! <n column degrees>
//! <m row degrees>
//! <n lines: 1-based row indices of the ones in each column>
//! <m lines: 1-based column indices of the ones in each row>
//! ```
//!
//! Zero entries inside the adjacency lines are padding and are skipped.
//! Blank lines are ignored; reported line numbers refer to the input text.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::BinaryMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AlistError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: expected {expected} entries, found {found}")]
    Count { line: usize, expected: usize, found: usize },
    #[error("line {line}: index {index} out of range 1..={max}")]
    IndexOutOfRange { line: usize, index: usize, max: usize },
    #[error("line {line}: declared degree {declared} but {found} indices listed")]
    DegreeMismatch { line: usize, declared: usize, found: usize },
    #[error("line {line}: degree {degree} exceeds declared maximum {max}")]
    DegreeAboveMax { line: usize, degree: usize, max: usize },
    #[error("line {line}: column and row adjacency lists disagree at ({row}, {col})")]
    Inconsistent { line: usize, row: usize, col: usize },
    #[error("unexpected end of input: missing {0}")]
    Truncated(&'static str),
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank line as (1-based line number, parsed integers).
    fn next_record(&mut self, what: &'static str) -> Result<(usize, Vec<usize>), AlistError> {
        for (idx, raw) in self.inner.by_ref() {
            let line = idx + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let values = raw
                .split_whitespace()
                .map(|tok| {
                    tok.parse::<usize>().map_err(|_| AlistError::Syntax {
                        line,
                        message: format!("'{tok}' is not a nonnegative integer"),
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            return Ok((line, values));
        }
        Err(AlistError::Truncated(what))
    }
}

fn expect_count(line: usize, values: &[usize], expected: usize) -> Result<(), AlistError> {
    if values.len() != expected {
        return Err(AlistError::Count {
            line,
            expected,
            found: values.len(),
        });
    }
    Ok(())
}

/// Parses alist text into a binary matrix with `m` rows and `n` columns.
pub fn parse_alist(text: &str) -> Result<BinaryMatrix, AlistError> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
    };
    let (line, dims) = lines.next_record("dimensions")?;
    expect_count(line, &dims, 2)?;
    let (n, m) = (dims[0], dims[1]);
    if n == 0 || m == 0 {
        return Err(AlistError::Syntax {
            line,
            message: "dimensions must be positive".into(),
        });
    }
    let (line, maxes) = lines.next_record("maximum degrees")?;
    expect_count(line, &maxes, 2)?;
    let (max_col, max_row) = (maxes[0], maxes[1]);

    let (col_line, col_deg) = lines.next_record("column degrees")?;
    expect_count(col_line, &col_deg, n)?;
    if let Some(&d) = col_deg.iter().find(|&&d| d > max_col) {
        return Err(AlistError::DegreeAboveMax {
            line: col_line,
            degree: d,
            max: max_col,
        });
    }
    let (row_line, row_deg) = lines.next_record("row degrees")?;
    expect_count(row_line, &row_deg, m)?;
    if let Some(&d) = row_deg.iter().find(|&&d| d > max_row) {
        return Err(AlistError::DegreeAboveMax {
            line: row_line,
            degree: d,
            max: max_row,
        });
    }

    let mut from_cols: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (col, &deg) in col_deg.iter().enumerate() {
        let (line, idx) = lines.next_record("column adjacency")?;
        let listed = read_indices(line, &idx, m)?;
        if listed.len() != deg {
            return Err(AlistError::DegreeMismatch {
                line,
                declared: deg,
                found: listed.len(),
            });
        }
        from_cols.extend(listed.into_iter().map(|row| (row, col)));
    }

    let mut matrix = BinaryMatrix::zeros(m, n);
    let mut row_total = 0;
    for (row, &deg) in row_deg.iter().enumerate() {
        let (line, idx) = lines.next_record("row adjacency")?;
        let listed = read_indices(line, &idx, n)?;
        if listed.len() != deg {
            return Err(AlistError::DegreeMismatch {
                line,
                declared: deg,
                found: listed.len(),
            });
        }
        for col in listed {
            if !from_cols.contains(&(row, col)) {
                return Err(AlistError::Inconsistent { line, row, col });
            }
            matrix.set(row, col, 1);
            row_total += 1;
        }
    }
    if row_total != from_cols.len() {
        let &(row, col) = from_cols
            .iter()
            .find(|&&(r, c)| matrix.get(r, c) == 0)
            .expect("a column entry is missing from the rows");
        return Err(AlistError::Inconsistent {
            line: col_line,
            row,
            col,
        });
    }
    Ok(matrix)
}

/// Converts 1-based indices to 0-based, skipping zero padding and rejecting
/// duplicates.
fn read_indices(line: usize, values: &[usize], max: usize) -> Result<Vec<usize>, AlistError> {
    let mut out = Vec::with_capacity(values.len());
    for &v in values.iter().filter(|&&v| v != 0) {
        if v > max {
            return Err(AlistError::IndexOutOfRange { line, index: v, max });
        }
        if out.contains(&(v - 1)) {
            return Err(AlistError::Syntax {
                line,
                message: format!("index {v} listed twice"),
            });
        }
        out.push(v - 1);
    }
    Ok(out)
}

/// Serializes a matrix in alist format, without zero padding.
pub fn emit_alist(matrix: &BinaryMatrix) -> String {
    let (m, n) = (matrix.rows(), matrix.cols());
    let cols: Vec<Vec<usize>> = (0..n).map(|c| matrix.col_support(c)).collect();
    let rows: Vec<Vec<usize>> = (0..m).map(|r| matrix.row_support(r)).collect();
    let join = |v: &mut dyn Iterator<Item = usize>| {
        let s = v.map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        // an empty adjacency list is written as a single padding zero
        if s.is_empty() {
            "0".to_string()
        } else {
            s
        }
    };
    let mut out = String::new();
    let _ = writeln!(out, "{n} {m}");
    let max_col = cols.iter().map(Vec::len).max().unwrap_or(0);
    let max_row = rows.iter().map(Vec::len).max().unwrap_or(0);
    let _ = writeln!(out, "{max_col} {max_row}");
    let _ = writeln!(out, "{}", join(&mut cols.iter().map(Vec::len)));
    let _ = writeln!(out, "{}", join(&mut rows.iter().map(Vec::len)));
    for c in &cols {
        let _ = writeln!(out, "{}", join(&mut c.iter().map(|&r| r + 1)));
    }
    for r in &rows {
        let _ = writeln!(out, "{}", join(&mut r.iter().map(|&c| c + 1)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const SINGLE_ROW: &str = "3 1\n1 3\n1 1 1\n3\n1\n1\n1\n1 2 3\n";

    // Hamming(7,4), H = [P | I3], written out by hand from the matrix
    const HAMMING: &str = "\
7 3
3 4
2 2 2 3 1 1 1
4 4 4
1 2
1 3
2 3
1 2 3
1
2
3
1 2 4 5
1 3 4 6
2 3 4 7
";

    #[test]
    fn single_parity_row() {
        let m = parse_alist(SINGLE_ROW).unwrap();
        assert_eq!(m, BinaryMatrix::from_rows(&[[1u8, 1, 1]]).unwrap());
    }

    #[test]
    fn hamming_by_hand() {
        let m = parse_alist(HAMMING).unwrap();
        let expected =
            BinaryMatrix::from_rows(&[[1u8, 1, 0, 1, 1, 0, 0], [1, 0, 1, 1, 0, 1, 0], [0, 1, 1, 1, 0, 0, 1]]).unwrap();
        assert_eq!(m, expected);
        assert_eq!(parse_alist(&emit_alist(&m)).unwrap(), m);
    }

    #[test]
    fn zero_padding_is_ignored() {
        let padded = "3 1\n1 3\n1 1 1\n3\n1\n1\n1 0\n1 2 3\n";
        assert_eq!(parse_alist(padded).unwrap(), parse_alist(SINGLE_ROW).unwrap());
    }

    #[test]
    fn errors_name_the_line() {
        // row index 0 in a column line becomes a degree mismatch on line 5
        let bad = "3 1\n1 3\n1 1 1\n3\n0\n1\n1\n1 2 3\n";
        assert_eq!(
            parse_alist(bad).unwrap_err(),
            AlistError::DegreeMismatch {
                line: 5,
                declared: 1,
                found: 0
            }
        );
        let bad = "3 1\n1 3\n1 1 1\n3\n1\n1\n2\n1 2 3\n";
        assert_eq!(
            parse_alist(bad).unwrap_err(),
            AlistError::IndexOutOfRange {
                line: 7,
                index: 2,
                max: 1
            }
        );
        let bad = "3 1\n1 3\n1 1\n3\n";
        assert!(matches!(
            parse_alist(bad).unwrap_err(),
            AlistError::Count { line: 3, .. }
        ));
        let bad = "3 1\n1 3\n1 1 1\n3\n1\n1\n1\n1 2\n";
        assert!(matches!(
            parse_alist(bad).unwrap_err(),
            AlistError::DegreeMismatch { line: 8, .. }
        ));
        let bad = "2 2\n1 1\n1 1\n1 1\n1\n2\n2\n1\n";
        assert!(matches!(
            parse_alist(bad).unwrap_err(),
            AlistError::Inconsistent { line: 7, .. }
        ));
        assert!(matches!(
            parse_alist("3 x\n").unwrap_err(),
            AlistError::Syntax { line: 1, .. }
        ));
        assert!(matches!(
            parse_alist("3 1\n1 3\n").unwrap_err(),
            AlistError::Truncated(_)
        ));
    }

    fn arb_matrix() -> impl Strategy<Value = BinaryMatrix> {
        (1usize..12, 1usize..20).prop_flat_map(|(m, n)| {
            proptest::collection::vec(proptest::collection::vec(0u8..2, n), m)
                .prop_map(|rows| BinaryMatrix::from_rows(&rows).unwrap())
        })
    }

    proptest! {
        #[test]
        fn emit_then_parse_is_identity(m in arb_matrix()) {
            prop_assert_eq!(parse_alist(&emit_alist(&m)).unwrap(), m);
        }
    }
}
