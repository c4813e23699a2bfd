//! Code-aware self-attention mask.
//!
//! Positions `0..n` are the codeword bits, positions `n..2n-k` the parity
//! checks. Starting from the identity, every check unmasks all pairs of bits
//! it involves, and each of those bits with the check itself. Check-check
//! pairs stay masked.

use serde::{Deserialize, Serialize};

use crate::code::BinaryMatrix;

/// Additive value standing in for minus infinity on denied entries.
pub const MASK_SENTINEL: f64 = -1e9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttentionMask {
    size: usize,
    allow: Vec<bool>,
}

impl AttentionMask {
    /// Every entry allowed (the unmasked ablation).
    pub fn unmasked(size: usize) -> Self {
        AttentionMask {
            size,
            allow: vec![true; size * size],
        }
    }

    /// Only the diagonal allowed.
    pub fn diagonal(size: usize) -> Self {
        let mut m = AttentionMask {
            size,
            allow: vec![false; size * size],
        };
        for i in 0..size {
            m.allow_pair(i, i);
        }
        m
    }

    /// Mask with `allowed(i, j) = f(i, j)`.
    pub fn from_fn(size: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        AttentionMask {
            size,
            allow: (0..size * size).map(|e| f(e / size, e % size)).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn allowed(&self, row: usize, col: usize) -> bool {
        self.allow[row * self.size + col]
    }

    fn allow_pair(&mut self, a: usize, b: usize) {
        self.allow[a * self.size + b] = true;
        self.allow[b * self.size + a] = true;
    }

    pub fn allowed_count(&self) -> usize {
        self.allow.iter().filter(|&&a| a).count()
    }

    /// Row-major additive view: 0 where allowed, [`MASK_SENTINEL`] elsewhere.
    pub fn additive(&self) -> Vec<f64> {
        self.allow
            .iter()
            .map(|&a| if a { 0.0 } else { MASK_SENTINEL })
            .collect()
    }

    /// Rows as strings of `#` (allowed) and `.` (denied).
    pub fn grid(&self) -> String {
        let mut out = String::with_capacity(self.size * (self.size + 1));
        for r in 0..self.size {
            out.extend((0..self.size).map(|c| if self.allowed(r, c) { '#' } else { '.' }));
            out.push('\n');
        }
        out
    }
}

pub fn build_mask(h: &BinaryMatrix) -> AttentionMask {
    let (checks, n) = (h.rows(), h.cols());
    let mut mask = AttentionMask::diagonal(n + checks);
    for i in 0..checks {
        let support = h.row_support(i);
        for (a, &j) in support.iter().enumerate() {
            mask.allow_pair(n + i, j);
            for &l in &support[a + 1..] {
                mask.allow_pair(j, l);
            }
        }
    }
    mask
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskStats {
    pub size: usize,
    pub allowed: usize,
    pub denied: usize,
    /// Denied fraction of the full `size x size` map.
    pub sparsity_ratio: f64,
    /// Allowed fraction, the pairwise work left relative to dense attention.
    pub pairwise_compute_ratio: f64,
    /// Number of ones in H.
    pub h_density: usize,
}

pub fn mask_stats(mask: &AttentionMask, h: &BinaryMatrix) -> MaskStats {
    let total = (mask.size() * mask.size()) as f64;
    let allowed = mask.allowed_count();
    let denied = mask.size() * mask.size() - allowed;
    MaskStats {
        size: mask.size(),
        allowed,
        denied,
        sparsity_ratio: denied as f64 / total,
        pairwise_compute_ratio: allowed as f64 / total,
        h_density: h.weight(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::construct::{hamming_7_4, polar};
    use proptest::prelude::*;

    #[test]
    fn small_codes_allow_everything() {
        let m = build_mask(&BinaryMatrix::from_rows(&[[1u8, 1]]).unwrap());
        assert_eq!(m.size(), 3);
        assert_eq!(m.allowed_count(), 9);
        let h = BinaryMatrix::from_rows(&[[1u8, 1, 1]]).unwrap();
        let m = build_mask(&h);
        assert_eq!(m.allowed_count(), 16);
        let s = mask_stats(&m, &h);
        assert_eq!(s.sparsity_ratio, 0.0);
        assert_eq!(s.pairwise_compute_ratio, 1.0);
    }

    #[test]
    fn hamming_spot_entries() {
        let code = hamming_7_4();
        let m = build_mask(code.parity_check());
        assert_eq!(m.size(), 10);
        assert!(m.allowed(7, 3));
        assert!(!m.allowed(8, 9));
        // bits 4 and 5 never share a check
        assert!(!m.allowed(4, 5));
        assert!(!m.allowed(7, 2));
        let add = m.additive();
        assert_eq!(add[7 * 10 + 3], 0.0);
        assert_eq!(add[8 * 10 + 9], MASK_SENTINEL);
    }

    #[test]
    fn diagonal_only_sparsity() {
        let h = BinaryMatrix::zeros(3, 7);
        let m = build_mask(&h);
        let s = mask_stats(&m, &h);
        assert!((s.sparsity_ratio - (1.0 - 1.0 / 10.0)).abs() < 1e-15);
    }

    #[test]
    fn grid_dump() {
        let g = build_mask(&BinaryMatrix::from_rows(&[[1u8, 0]]).unwrap()).grid();
        assert_eq!(g, "#.#\n.#.\n#.#\n");
    }

    #[test]
    fn adding_a_one_never_removes_pairs() {
        let code = polar(64, 48).unwrap();
        let h = code.parity_check().clone();
        let before = build_mask(&h);
        let mut h2 = h.clone();
        let (r, c) = (0..h.rows())
            .flat_map(|r| (0..h.cols()).map(move |c| (r, c)))
            .find(|&(r, c)| h.get(r, c) == 0)
            .unwrap();
        h2.set(r, c, 1);
        let after = build_mask(&h2);
        for i in 0..before.size() {
            for j in 0..before.size() {
                assert!(!before.allowed(i, j) || after.allowed(i, j));
            }
        }
    }

    proptest! {
        #[test]
        fn monotone_under_random_insertions(
            rows in proptest::collection::vec(proptest::collection::vec(0u8..2, 12), 1..6),
            r in 0usize..6, c in 0usize..12,
        ) {
            let h = BinaryMatrix::from_rows(&rows).unwrap();
            let mut h2 = h.clone();
            h2.set(r % h.rows(), c, 1);
            let (a, b) = (build_mask(&h), build_mask(&h2));
            for i in 0..a.size() {
                for j in 0..a.size() {
                    prop_assert!(!a.allowed(i, j) || b.allowed(i, j));
                }
            }
        }
    }
}
