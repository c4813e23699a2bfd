//! Parity-check matrices for the codes used throughout the workbench.
//!
//! Polar and BCH matrices are generated from their textbook definitions, so
//! the same matrices can be rebuilt anywhere without external files.

use super::{BinaryMatrix, CodeError, LinearCode};

/// Names accepted by [`builtin`].
pub const BUILTIN_CODES: &[&str] = &[
    "hamming_7_4",
    "repetition_2_1",
    "single_parity_3_2",
    "polar_64_32",
    "polar_64_48",
    "polar_128_64",
    "polar_128_86",
    "polar_128_96",
    "bch_15_7",
    "bch_31_16",
    "bch_63_36",
    "bch_63_45",
    "bch_63_51",
];

/// Benchmark codes from the published result tables that can be rebuilt
/// from their algebraic definition.
pub const BENCHMARK_CODES: &[&str] = &[
    "polar_64_32",
    "polar_64_48",
    "polar_128_64",
    "polar_128_86",
    "polar_128_96",
    "bch_31_16",
    "bch_63_36",
    "bch_63_45",
    "bch_63_51",
];

/// Looks up a built-in code by name.
pub fn builtin(name: &str) -> Result<LinearCode, CodeError> {
    let parse_nk = |rest: &str| -> Option<(usize, usize)> {
        let (n, k) = rest.split_once('_')?;
        Some((n.parse().ok()?, k.parse().ok()?))
    };
    match name {
        "hamming_7_4" => Ok(hamming_7_4()),
        "repetition_2_1" => Ok(repetition(2)),
        "single_parity_3_2" => Ok(single_parity(3)),
        _ => {
            if let Some((n, k)) = name.strip_prefix("polar_").and_then(parse_nk) {
                polar(n, k)
            } else if let Some((n, k)) = name.strip_prefix("bch_").and_then(parse_nk) {
                bch(n, k)
            } else {
                Err(CodeError::UnknownCode(name.to_string()))
            }
        }
    }
}

/// Hamming(7,4) with `H = [P | I3]`.
pub fn hamming_7_4() -> LinearCode {
    let h = BinaryMatrix::from_rows(&[[1u8, 1, 0, 1, 1, 0, 0], [1, 0, 1, 1, 0, 1, 0], [0, 1, 1, 1, 0, 0, 1]])
        .expect("static matrix");
    LinearCode::from_parity("hamming_7_4", h).expect("Hamming H has full rank")
}

/// Repetition code of length `n`: checks `x0 + xi = 0`.
pub fn repetition(n: usize) -> LinearCode {
    assert!(n >= 2);
    let mut h = BinaryMatrix::zeros(n - 1, n);
    for i in 1..n {
        h.set(i - 1, 0, 1);
        h.set(i - 1, i, 1);
    }
    LinearCode::from_parity(format!("repetition_{n}_1"), h).expect("full rank")
}

/// Single parity-check code of length `n`.
pub fn single_parity(n: usize) -> LinearCode {
    assert!(n >= 2);
    let h = BinaryMatrix::from_rows(&[vec![1u8; n]]).expect("nonempty");
    LinearCode::from_parity(format!("single_parity_{n}_{}", n - 1), h).expect("full rank")
}

/// Design Eb/N0 (dB) for the Bhattacharyya polar construction.
pub const POLAR_DESIGN_EBNO_DB: f64 = 2.0;

/// Information set of a length-`n` polar code: the `k` synthetic channels
/// with the smallest Bhattacharyya parameters (ties broken by index).
pub fn polar_info_set(n: usize, k: usize) -> Vec<usize> {
    let rate = k as f64 / n as f64;
    let mut z = vec![(-rate * 10f64.powf(POLAR_DESIGN_EBNO_DB / 10.0)).exp()];
    while z.len() < n {
        z = z.iter().flat_map(|&v| [2.0 * v - v * v, v * v]).collect();
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[a].total_cmp(&z[b]).then(a.cmp(&b)));
    let mut info = order[..k].to_vec();
    info.sort_unstable();
    info
}

/// Polar code with kernel `F^{⊗m}` in natural order.
///
/// Since `F^{⊗m}` is its own inverse over GF(2), `u = x F^{⊗m}`; each frozen
/// index `i` contributes the check given by column `i`, whose support is
/// every `j` with `j & i == i`.
pub fn polar(n: usize, k: usize) -> Result<LinearCode, CodeError> {
    if !n.is_power_of_two() || n < 2 || k == 0 || k >= n {
        return Err(CodeError::UnknownCode(format!("polar_{n}_{k}")));
    }
    let info = polar_info_set(n, k);
    let frozen: Vec<usize> = (0..n).filter(|i| info.binary_search(i).is_err()).collect();
    let mut h = BinaryMatrix::zeros(frozen.len(), n);
    for (r, &i) in frozen.iter().enumerate() {
        for j in 0..n {
            if j & i == i {
                h.set(r, j, 1);
            }
        }
    }
    LinearCode::from_parity(format!("polar_{n}_{k}"), h)
}

/// Primitive polynomials (bit `i` = coefficient of `x^i`) for GF(2^m).
fn primitive_poly(m: u32) -> Option<u32> {
    Some(match m {
        3 => 0b1011,
        4 => 0b1_0011,
        5 => 0b10_0101,
        6 => 0b100_0011,
        7 => 0b1000_1001,
        8 => 0b1_0001_1101,
        _ => return None,
    })
}

/// Multiplies two GF(2) polynomials given as coefficient vectors (index =
/// power).
fn poly_mul(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 1 {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] ^= y;
            }
        }
    }
    out
}

/// Generator polynomial of the narrow-sense primitive BCH code of length
/// `n = 2^m - 1` and dimension `k`, as coefficients by increasing power.
pub fn bch_generator_poly(n: usize, k: usize) -> Result<Vec<u8>, CodeError> {
    let unknown = || CodeError::UnknownCode(format!("bch_{n}_{k}"));
    let m = (n + 1).trailing_zeros();
    if (n + 1) != 1 << m || k == 0 || k >= n {
        return Err(unknown());
    }
    let prim = primitive_poly(m).ok_or_else(unknown)?;
    // antilog table of the primitive element
    let mut exp = Vec::with_capacity(n);
    let mut v = 1u32;
    for _ in 0..n {
        exp.push(v);
        v <<= 1;
        if v >> m != 0 {
            v ^= prim;
        }
    }
    let mut log = vec![0usize; n + 1];
    for (i, &e) in exp.iter().enumerate() {
        log[e as usize] = i;
    }
    let gf_mul = |a: u32, b: u32| -> u32 {
        if a == 0 || b == 0 {
            0
        } else {
            exp[(log[a as usize] + log[b as usize]) % n]
        }
    };

    let mut g = vec![1u8];
    let mut covered = vec![false; n];
    let mut i = 1;
    while g.len() - 1 < n - k && i < n {
        if !covered[i] {
            // minimal polynomial of alpha^i: product over its cyclotomic coset
            let mut coset = Vec::new();
            let mut j = i;
            while !covered[j] {
                covered[j] = true;
                coset.push(j);
                j = (2 * j) % n;
            }
            let mut p: Vec<u32> = vec![1];
            for &j in &coset {
                let root = exp[j];
                let mut q = vec![0u32; p.len() + 1];
                for (t, &c) in p.iter().enumerate() {
                    q[t] ^= gf_mul(c, root);
                    q[t + 1] ^= c;
                }
                p = q;
            }
            let p: Vec<u8> = p
                .into_iter()
                .map(|c| {
                    debug_assert!(c <= 1, "minimal polynomial has binary coefficients");
                    c as u8
                })
                .collect();
            g = poly_mul(&g, &p);
        }
        i += 1;
    }
    if g.len() - 1 != n - k {
        return Err(unknown());
    }
    Ok(g)
}

/// Narrow-sense primitive BCH code with the cyclic parity-check matrix built
/// from shifts of the reversed check polynomial `h(x) = (x^n - 1) / g(x)`.
pub fn bch(n: usize, k: usize) -> Result<LinearCode, CodeError> {
    let g = bch_generator_poly(n, k)?;
    // long division of x^n + 1 by g
    let mut rem = vec![0u8; n + 1];
    rem[0] = 1;
    rem[n] = 1;
    let deg_g = g.len() - 1;
    let mut quotient = vec![0u8; k + 1];
    for d in (deg_g..=n).rev() {
        if rem[d] == 1 {
            let shift = d - deg_g;
            quotient[shift] = 1;
            for (t, &c) in g.iter().enumerate() {
                rem[shift + t] ^= c;
            }
        }
    }
    debug_assert!(rem.iter().all(|&b| b == 0));
    let reversed: Vec<u8> = quotient.iter().rev().copied().collect();
    let mut h = BinaryMatrix::zeros(n - k, n);
    for r in 0..n - k {
        for (t, &c) in reversed.iter().enumerate() {
            h.set(r, r + t, c);
        }
    }
    LinearCode::from_parity(format!("bch_{n}_{k}"), h)
}
