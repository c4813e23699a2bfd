//! Dense binary matrices over GF(2).

use std::fmt;

use super::CodeError;

/// A dense binary matrix stored row-major, one byte per entry.
///
/// Entries are always 0 or 1. Codes handled here are at most a few hundred
/// bits long, so the dense layout is both simpler and faster than a sparse
/// one for the elimination and syndrome routines.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    /// All-zero matrix. Panics on a zero dimension.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows >= 1 && cols >= 1, "binary matrix needs rows, cols >= 1");
        BinaryMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(size: usize) -> Self {
        let mut m = Self::zeros(size, size);
        for i in 0..size {
            m.set(i, i, 1);
        }
        m
    }

    /// Builds a matrix from nested rows. Every entry must be 0 or 1 and all
    /// rows must have the same nonzero length.
    pub fn from_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self, CodeError> {
        if rows.is_empty() || rows[0].as_ref().is_empty() {
            return Err(CodeError::EmptyMatrix);
        }
        let cols = rows[0].as_ref().len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != cols {
                return Err(CodeError::RaggedRows {
                    row: r,
                    expected: cols,
                    found: row.len(),
                });
            }
            if let Some(&bad) = row.iter().find(|&&b| b > 1) {
                return Err(CodeError::NotBinary { row: r, value: bad });
            }
            data.extend_from_slice(row);
        }
        Ok(BinaryMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, bit: u8) {
        debug_assert!(bit <= 1);
        self.data[row * self.cols + col] = bit;
    }

    pub fn row(&self, row: usize) -> &[u8] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    /// Column indices holding a one in `row`.
    pub fn row_support(&self, row: usize) -> Vec<usize> {
        self.row(row)
            .iter()
            .enumerate()
            .filter_map(|(c, &b)| (b == 1).then_some(c))
            .collect()
    }

    /// Row indices holding a one in `col`.
    pub fn col_support(&self, col: usize) -> Vec<usize> {
        (0..self.rows).filter(|&r| self.get(r, col) == 1).collect()
    }

    /// Number of ones.
    pub fn weight(&self) -> usize {
        self.data.iter().map(|&b| b as usize).sum()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    /// Matrix product over GF(2).
    pub fn mul(&self, other: &BinaryMatrix) -> Result<Self, CodeError> {
        if self.cols != other.rows {
            return Err(CodeError::LengthMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                if self.get(r, k) == 1 {
                    for c in 0..other.cols {
                        out.data[r * other.cols + c] ^= other.get(k, c);
                    }
                }
            }
        }
        Ok(out)
    }

    /// Matrix-vector product `self * v` over GF(2).
    pub fn mul_vec(&self, v: &[u8]) -> Result<Vec<u8>, CodeError> {
        if v.len() != self.cols {
            return Err(CodeError::LengthMismatch {
                expected: self.cols,
                found: v.len(),
            });
        }
        Ok((0..self.rows)
            .map(|r| self.row(r).iter().zip(v).fold(0u8, |acc, (&a, &b)| acc ^ (a & b)))
            .collect())
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&b| b == 0)
    }

    /// Rank over GF(2).
    pub fn rank(&self) -> usize {
        let mut work = self.clone();
        work.reduce(false).len()
    }

    /// In-place reduction to reduced row echelon form. Returns the pivot
    /// column of each pivot row, in row order. With `from_right` the pivot
    /// search scans columns right to left.
    pub(crate) fn reduce(&mut self, from_right: bool) -> Vec<usize> {
        let mut pivots = Vec::new();
        let mut next_row = 0;
        let order: Vec<usize> = if from_right {
            (0..self.cols).rev().collect()
        } else {
            (0..self.cols).collect()
        };
        for &col in &order {
            if next_row == self.rows {
                break;
            }
            let Some(p) = (next_row..self.rows).find(|&r| self.get(r, col) == 1) else {
                continue;
            };
            self.swap_rows(p, next_row);
            for r in 0..self.rows {
                if r != next_row && self.get(r, col) == 1 {
                    self.xor_row_into(next_row, r);
                }
            }
            pivots.push(col);
            next_row += 1;
        }
        pivots
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(a * self.cols + c, b * self.cols + c);
        }
    }

    fn xor_row_into(&mut self, src: usize, dst: usize) {
        for c in 0..self.cols {
            self.data[dst * self.cols + c] ^= self.data[src * self.cols + c];
        }
    }
}

impl fmt::Debug for BinaryMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BinaryMatrix {}x{} [", self.rows, self.cols)?;
        for r in 0..self.rows {
            let line: String = self.row(r).iter().map(|&b| (b'0' + b) as char).collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_binary_and_ragged() {
        assert!(matches!(
            BinaryMatrix::from_rows(&[[0u8, 2]]),
            Err(CodeError::NotBinary { .. })
        ));
        let ragged: Vec<Vec<u8>> = vec![vec![1, 0], vec![1]];
        assert!(matches!(
            BinaryMatrix::from_rows(&ragged),
            Err(CodeError::RaggedRows { .. })
        ));
    }

    #[test]
    fn rank_and_product() {
        let m = BinaryMatrix::from_rows(&[[1u8, 1, 0], [0, 1, 1], [1, 0, 1]]).unwrap();
        // third row is the sum of the first two
        assert_eq!(m.rank(), 2);
        let id = BinaryMatrix::identity(3);
        assert_eq!(m.mul(&id).unwrap(), m);
        assert_eq!(m.mul_vec(&[1, 1, 1]).unwrap(), vec![0, 0, 0]);
    }
}
