//! Codeword-invariant pre- and post-processing.
//!
//! The decoder never sees `y` directly. It sees the magnitudes `|y|` and the
//! syndrome of the hard decision, both of which are unchanged when the
//! transmitted codeword changes and the noise is multiplied by its BPSK
//! image. Training on the zero codeword is therefore enough.

use crate::code::{BinaryMatrix, CodeError};

/// The `bin(.)` map: 0 for nonnegative values, 1 for negative ones.
pub fn hard_decision(y: &[f64]) -> Vec<u8> {
    y.iter().map(|&v| u8::from(v < 0.0)).collect()
}

/// Magnitudes and syndrome of a received word; the model input of length
/// `2n - k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PreprocessedWord {
    pub magnitude: Vec<f64>,
    pub syndrome: Vec<u8>,
}

impl PreprocessedWord {
    pub fn len(&self) -> usize {
        self.magnitude.len() + self.syndrome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Per-position embedding scalars: `|y_i|` for bit positions and
    /// `1 - 2 s_j` for check positions.
    pub fn scales(&self) -> impl Iterator<Item = f64> + '_ {
        self.magnitude
            .iter()
            .copied()
            .chain(self.syndrome.iter().map(|&s| 1.0 - 2.0 * f64::from(s)))
    }

    /// The concatenated view `[|y|, s(y)]`.
    pub fn combined(&self) -> Vec<f64> {
        self.magnitude
            .iter()
            .copied()
            .chain(self.syndrome.iter().map(|&s| f64::from(s)))
            .collect()
    }
}

pub fn preprocess(h: &BinaryMatrix, y: &[f64]) -> Result<PreprocessedWord, CodeError> {
    if y.len() != h.cols() {
        return Err(CodeError::LengthMismatch {
            expected: h.cols(),
            found: y.len(),
        });
    }
    Ok(PreprocessedWord {
        magnitude: y.iter().map(|v| v.abs()).collect(),
        syndrome: h.mul_vec(&hard_decision(y))?,
    })
}

/// Binary multiplicative noise `bin(y * x_s)`: 1 wherever the hard decision
/// disagrees with the transmitted symbol.
pub fn multiplicative_target(y: &[f64], symbols: &[f64]) -> Result<Vec<u8>, CodeError> {
    if y.len() != symbols.len() {
        return Err(CodeError::LengthMismatch {
            expected: symbols.len(),
            found: y.len(),
        });
    }
    Ok(y.iter().zip(symbols).map(|(&a, &s)| u8::from(a * s < 0.0)).collect())
}

/// Signed soft noise from flip logits: `1 - 2 sigmoid(u)`. Positive means
/// "keep the channel sign".
pub fn soft_noise_from_logits(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&u| -(0.5 * u).tanh()).collect()
}

/// `x_hat = bin(sign(soft_noise * y))`.
pub fn postprocess(y: &[f64], soft_noise: &[f64]) -> Result<Vec<u8>, CodeError> {
    if y.len() != soft_noise.len() {
        return Err(CodeError::LengthMismatch {
            expected: y.len(),
            found: soft_noise.len(),
        });
    }
    Ok(y.iter().zip(soft_noise).map(|(&v, &z)| u8::from(v * z < 0.0)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{bpsk_modulate, stream};
    use crate::code::construct::hamming_7_4;
    use rand::Rng;

    #[test]
    fn hard_decision_examples() {
        assert_eq!(hard_decision(&[0.5, -1.2, 0.1]), vec![0, 1, 0]);
        assert_eq!(hard_decision(&[0.0]), vec![0]);
    }

    #[test]
    fn preprocess_examples() {
        let code = hamming_7_4();
        let x = code.encode(&[0, 1, 1, 0]).unwrap();
        let p = preprocess(code.parity_check(), &bpsk_modulate(&x)).unwrap();
        assert_eq!(p.magnitude, vec![1.0; 7]);
        assert_eq!(p.syndrome, vec![0; 3]);
        assert_eq!(p.len(), 10);

        let h = BinaryMatrix::from_rows(&[[1u8, 1, 1]]).unwrap();
        let p = preprocess(&h, &[0.5, -1.2, 0.1]).unwrap();
        assert_eq!(p.magnitude, vec![0.5, 1.2, 0.1]);
        assert_eq!(p.syndrome, vec![1]);
        assert_eq!(p.combined(), vec![0.5, 1.2, 0.1, 1.0]);
        assert!(preprocess(&h, &[1.0]).is_err());
    }

    #[test]
    fn preprocessing_ignores_the_codeword() {
        let code = hamming_7_4();
        let mut rng = stream(11, 0);
        for _ in 0..1000 {
            let msg: Vec<u8> = (0..4).map(|_| rng.random_range(0..2)).collect();
            let xs = bpsk_modulate(&code.encode(&msg).unwrap());
            let z: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
            let direct: Vec<f64> = xs.iter().zip(&z).map(|(a, b)| a + b).collect();
            let folded: Vec<f64> = xs.iter().zip(&z).map(|(a, b)| 1.0 + a * b).collect();
            assert_eq!(
                preprocess(code.parity_check(), &direct).unwrap(),
                preprocess(code.parity_check(), &folded).unwrap()
            );
        }
    }

    #[test]
    fn target_examples() {
        let y = [0.3, -0.2, 1.4];
        assert_eq!(multiplicative_target(&y, &[1.0; 3]).unwrap(), hard_decision(&y));
        let xs = [-1.0, 1.0, -1.0];
        assert_eq!(multiplicative_target(&xs, &xs).unwrap(), vec![0, 0, 0]);
        assert_eq!(multiplicative_target(&[0.3, 0.7], &[-1.0, 1.0]).unwrap(), vec![1, 0]);
        assert!(multiplicative_target(&[0.3], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn postprocess_examples() {
        let y = [0.4, -0.3, 0.9, -1.1];
        assert_eq!(postprocess(&y, &[1.0; 4]).unwrap(), hard_decision(&y));
        // transmitted x = (0, 0, 1, 1); the channel flipped positions 1 and 2
        let flips = [1.0, -1.0, -1.0, 1.0];
        assert_eq!(postprocess(&y, &flips).unwrap(), vec![0, 0, 1, 1]);
        assert!(postprocess(&y, &[1.0]).is_err());
        assert_eq!(soft_noise_from_logits(&[0.0])[0], 0.0);
        let s = soft_noise_from_logits(&[20.0, -20.0]);
        assert!(s[0] < -0.999 && s[1] > 0.999);
    }
}
