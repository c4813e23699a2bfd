//! Binary linear block codes: parity-check ingestion, generator derivation,
//! encoding, syndromes and an exhaustive maximum-likelihood oracle.

mod alist;
pub mod construct;
mod matrix;

use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

pub use alist::{emit_alist, parse_alist, AlistError};
pub use matrix::BinaryMatrix;

/// Largest message length the ML oracle will enumerate.
pub const ML_MAX_K: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodeError {
    #[error("matrix must have at least one row and one column")]
    EmptyMatrix,
    #[error("row {row} has length {found}, expected {expected}")]
    RaggedRows { row: usize, expected: usize, found: usize },
    #[error("entry {value} in row {row} is not a bit")]
    NotBinary { row: usize, value: u8 },
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("parity-check matrix has rank {rank} but {rows} rows")]
    RankDeficient { rank: usize, rows: usize },
    #[error("parity-check matrix with {rows} rows and {cols} columns does not define a code with 0 < k < n")]
    BadDimensions { rows: usize, cols: usize },
    #[error("ML decoding enumerates 2^k codewords; k = {k} exceeds the limit {limit}")]
    TooLargeForMl { k: usize, limit: usize },
    #[error("unknown code '{0}'")]
    UnknownCode(String),
}

/// Derives a generator matrix from a full-rank parity-check matrix.
///
/// Elimination runs on a copy of `h`, choosing pivots from the rightmost
/// columns first, so the message bits land on the leftmost columns that are
/// not pivots. For `h = [P | I]` this yields `G = [I | Pᵀ]`. The returned
/// vector lists the information (systematic) positions in message order.
pub fn generator_from_parity(h: &BinaryMatrix) -> Result<(BinaryMatrix, Vec<usize>), CodeError> {
    let (m, n) = (h.rows(), h.cols());
    let mut rref = h.clone();
    let pivots = rref.reduce(true);
    if pivots.len() != m {
        return Err(CodeError::RankDeficient {
            rank: pivots.len(),
            rows: m,
        });
    }
    if m >= n {
        return Err(CodeError::BadDimensions { rows: m, cols: n });
    }
    let mut is_pivot = vec![false; n];
    for &p in &pivots {
        is_pivot[p] = true;
    }
    let info: Vec<usize> = (0..n).filter(|&c| !is_pivot[c]).collect();
    let k = info.len();
    let mut g = BinaryMatrix::zeros(k, n);
    for (row, &free) in info.iter().enumerate() {
        g.set(row, free, 1);
        // pivot variable of each reduced row equals the sum of its free entries
        for (r, &p) in pivots.iter().enumerate() {
            if rref.get(r, free) == 1 {
                g.set(row, p, 1);
            }
        }
    }
    Ok((g, info))
}

/// Syndrome `H v` over GF(2).
pub fn syndrome(h: &BinaryMatrix, v: &[u8]) -> Result<Vec<u8>, CodeError> {
    h.mul_vec(v)
}

/// A binary linear code given by its parity-check matrix.
///
/// The generator is derived once at construction and `h` is kept exactly as
/// supplied; masks and syndromes always use the original matrix.
#[derive(Debug, Clone)]
pub struct LinearCode {
    name: String,
    h: BinaryMatrix,
    g: BinaryMatrix,
    info_positions: Vec<usize>,
    codebook: Arc<std::sync::OnceLock<Vec<Vec<u8>>>>,
}

impl PartialEq for LinearCode {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name && self.h == other.h
    }
}

impl LinearCode {
    pub fn from_parity(name: impl Into<String>, h: BinaryMatrix) -> Result<Self, CodeError> {
        let (g, info_positions) = generator_from_parity(&h)?;
        Ok(LinearCode {
            name: name.into(),
            h,
            g,
            info_positions,
            codebook: Arc::new(std::sync::OnceLock::new()),
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Block length.
    pub fn n(&self) -> usize {
        self.h.cols()
    }

    /// Message length.
    pub fn k(&self) -> usize {
        self.h.cols() - self.h.rows()
    }

    /// Number of parity checks, `n - k`.
    pub fn checks(&self) -> usize {
        self.h.rows()
    }

    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.n() as f64
    }

    pub fn parity_check(&self) -> &BinaryMatrix {
        &self.h
    }

    pub fn generator(&self) -> &BinaryMatrix {
        &self.g
    }

    /// Codeword positions carrying the message bits, in message order.
    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    /// `x = m G` over GF(2).
    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>, CodeError> {
        if message.len() != self.k() {
            return Err(CodeError::LengthMismatch {
                expected: self.k(),
                found: message.len(),
            });
        }
        let mut x = vec![0u8; self.n()];
        for (row, &bit) in message.iter().enumerate() {
            if bit & 1 == 1 {
                for (xi, &gi) in x.iter_mut().zip(self.g.row(row)) {
                    *xi ^= gi;
                }
            }
        }
        Ok(x)
    }

    pub fn syndrome(&self, v: &[u8]) -> Result<Vec<u8>, CodeError> {
        syndrome(&self.h, v)
    }

    pub fn is_codeword(&self, v: &[u8]) -> Result<bool, CodeError> {
        Ok(self.syndrome(v)?.iter().all(|&s| s == 0))
    }

    /// All `2^k` codewords, indexed by message in lexicographic order
    /// (message bit 0 most significant). Cached after the first call.
    pub fn codebook(&self) -> Result<&[Vec<u8>], CodeError> {
        let k = self.k();
        if k > ML_MAX_K {
            return Err(CodeError::TooLargeForMl { k, limit: ML_MAX_K });
        }
        Ok(self.codebook.get_or_init(|| {
            (0..1usize << k)
                .map(|idx| {
                    self.encode(&index_to_message(idx, k))
                        .expect("message length matches k")
                })
                .collect()
        }))
    }

    /// Exhaustive maximum-likelihood decoding under BPSK/AWGN: maximizes the
    /// correlation between the BPSK image of each codeword and `y`. Ties go to
    /// the lexicographically smallest message.
    pub fn ml_decode(&self, y: &[f64]) -> Result<Vec<u8>, CodeError> {
        if y.len() != self.n() {
            return Err(CodeError::LengthMismatch {
                expected: self.n(),
                found: y.len(),
            });
        }
        let book = self.codebook()?;
        let score = |cw: &Vec<u8>| -> f64 { cw.iter().zip(y).map(|(&b, &v)| if b == 0 { v } else { -v }).sum() };
        // reduce in fixed-size chunks so the winner does not depend on the
        // thread count; within and across chunks the earliest index wins ties
        const CHUNK: usize = 4096;
        let best = book
            .par_chunks(CHUNK)
            .enumerate()
            .map(|(c, chunk)| {
                let mut best = (f64::NEG_INFINITY, usize::MAX);
                for (i, cw) in chunk.iter().enumerate() {
                    let s = score(cw);
                    if s > best.0 {
                        best = (s, c * CHUNK + i);
                    }
                }
                best
            })
            .collect::<Vec<_>>()
            .into_iter()
            .fold(
                (f64::NEG_INFINITY, usize::MAX),
                |acc, cand| {
                    if cand.0 > acc.0 {
                        cand
                    } else {
                        acc
                    }
                },
            );
        Ok(book[best.1].clone())
    }
}

fn index_to_message(idx: usize, k: usize) -> Vec<u8> {
    (0..k).map(|i| ((idx >> (k - 1 - i)) & 1) as u8).collect()
}

#[cfg(test)]
mod tests {
    use super::construct::hamming_7_4;
    use super::*;

    fn gf2_mul_oracle(a: &BinaryMatrix, b: &BinaryMatrix) -> Vec<Vec<u8>> {
        // plain triple loop, independent of BinaryMatrix::mul
        (0..a.rows())
            .map(|i| {
                (0..b.cols())
                    .map(|j| (0..a.cols()).map(|t| a.get(i, t) * b.get(t, j)).sum::<u8>() % 2)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn repetition_generator() {
        let h = BinaryMatrix::from_rows(&[[1u8, 1]]).unwrap();
        let (g, info) = generator_from_parity(&h).unwrap();
        assert_eq!(g, BinaryMatrix::from_rows(&[[1u8, 1]]).unwrap());
        assert_eq!(info, vec![0]);
    }

    #[test]
    fn hamming_generator_is_systematic() {
        let code = hamming_7_4();
        let expected = BinaryMatrix::from_rows(&[
            [1u8, 0, 0, 0, 1, 1, 0],
            [0, 1, 0, 0, 1, 0, 1],
            [0, 0, 1, 0, 0, 1, 1],
            [0, 0, 0, 1, 1, 1, 1],
        ])
        .unwrap();
        assert_eq!(code.generator(), &expected);
        let prod = gf2_mul_oracle(code.generator(), &code.parity_check().transpose());
        assert!(prod.iter().flatten().all(|&b| b == 0));
        assert_eq!(code.info_positions(), &[0, 1, 2, 3]);
    }

    #[test]
    fn rank_deficient_parity_is_rejected() {
        let h = BinaryMatrix::from_rows(&[[1u8, 1], [1, 1]]).unwrap();
        assert_eq!(
            generator_from_parity(&h).unwrap_err(),
            CodeError::RankDeficient { rank: 1, rows: 2 }
        );
        let h = BinaryMatrix::from_rows(&[[1u8, 0], [0, 1]]).unwrap();
        assert!(matches!(
            generator_from_parity(&h),
            Err(CodeError::BadDimensions { .. })
        ));
        let h = BinaryMatrix::from_rows(&[[1u8, 1, 0], [1, 1, 0]]).unwrap();
        assert_eq!(
            generator_from_parity(&h).unwrap_err(),
            CodeError::RankDeficient { rank: 1, rows: 2 }
        );
    }

    #[test]
    fn encode_examples() {
        let code = hamming_7_4();
        assert_eq!(code.encode(&[0, 0, 0, 0]).unwrap(), vec![0; 7]);
        assert_eq!(code.encode(&[1, 0, 0, 0]).unwrap(), vec![1, 0, 0, 0, 1, 1, 0]);
        assert!(code.encode(&[1, 0]).is_err());
        let rep = LinearCode::from_parity("rep", BinaryMatrix::from_rows(&[[1u8, 1]]).unwrap()).unwrap();
        assert_eq!(rep.encode(&[1]).unwrap(), vec![1, 1]);
    }

    #[test]
    fn syndrome_examples() {
        let code = hamming_7_4();
        assert_eq!(code.syndrome(&[0; 7]).unwrap(), vec![0, 0, 0]);
        assert_eq!(code.syndrome(&[1, 0, 0, 0, 0, 0, 0]).unwrap(), vec![1, 1, 0]);
        assert_eq!(code.syndrome(&[1, 0, 0, 0, 1, 1, 0]).unwrap(), vec![0, 0, 0]);
        assert!(code.syndrome(&[0; 6]).is_err());
    }

    #[test]
    fn ml_examples() {
        let rep = LinearCode::from_parity("rep", BinaryMatrix::from_rows(&[[1u8, 1]]).unwrap()).unwrap();
        assert_eq!(rep.ml_decode(&[0.9, -0.1]).unwrap(), vec![0, 0]);
        // exact tie resolves to the all-zero message
        assert_eq!(rep.ml_decode(&[0.5, -0.5]).unwrap(), vec![0, 0]);

        let code = hamming_7_4();
        let x = code.encode(&[1, 0, 1, 1]).unwrap();
        let mut y: Vec<f64> = x.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect();
        assert_eq!(code.ml_decode(&y).unwrap(), x);
        y[2] = -y[2].signum() * 0.1;
        assert_eq!(code.ml_decode(&y).unwrap(), x);
    }

    #[test]
    fn ml_refuses_large_k() {
        let code = construct::polar(64, 32).unwrap();
        assert!(matches!(
            code.ml_decode(&[1.0; 64]),
            Err(CodeError::TooLargeForMl { k: 32, .. })
        ));
    }

    #[test]
    fn codebook_exhaustive_properties() {
        for code in [hamming_7_4(), construct::bch(15, 7).unwrap()] {
            let book = code.codebook().unwrap();
            let distinct: std::collections::HashSet<_> = book.iter().collect();
            assert_eq!(distinct.len(), 1 << code.k());
            for cw in book {
                assert!(code.is_codeword(cw).unwrap());
                let y: Vec<f64> = cw.iter().map(|&b| 1.0 - 2.0 * b as f64).collect();
                assert_eq!(&code.ml_decode(&y).unwrap(), cw);
            }
        }
    }
}
