//! BPSK modulation over an AWGN channel parameterized by Eb/N0.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Random stream type used for every stochastic step.
pub type ChannelRng = ChaCha8Rng;

/// Recorded in run metadata so reports name the sampler that produced them.
pub const GAUSSIAN_SAMPLER: &str = "ChaCha8 stream + rand_distr StandardNormal (ziggurat)";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    #[error("code rate must lie in (0, 1), got {0}")]
    BadRate(f64),
    #[error("noise standard deviation must be positive and finite, got {0}")]
    BadSigma(f64),
}

/// Independent stream `index` derived from a base seed.
pub fn stream(base_seed: u64, index: u64) -> ChannelRng {
    ChaCha8Rng::seed_from_u64(base_seed.wrapping_add(index))
}

/// Bit 0 maps to +1, bit 1 to -1.
pub fn bpsk_modulate(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| 1.0 - 2.0 * f64::from(b)).collect()
}

/// `sigma = (2 R 10^(Eb/N0 / 10))^(-1/2)`.
pub fn ebno_to_sigma(ebno_db: f64, rate: f64) -> Result<f64, ChannelError> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(ChannelError::BadRate(rate));
    }
    Ok((2.0 * rate * 10f64.powf(ebno_db / 10.0)).powf(-0.5))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    pub ebno_db: f64,
    pub rate: f64,
    pub sigma: f64,
}

impl ChannelParams {
    pub fn new(ebno_db: f64, rate: f64) -> Result<Self, ChannelError> {
        Ok(ChannelParams {
            ebno_db,
            rate,
            sigma: ebno_to_sigma(ebno_db, rate)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceivedWord {
    pub y: Vec<f64>,
    pub sigma: f64,
}

/// Standard normal samples, one per entry of `out`.
pub fn fill_gaussian<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    for v in out {
        *v = rng.sample(StandardNormal);
    }
}

/// `y = x_s + sigma * g` with `g` i.i.d. standard normal drawn from `rng`.
pub fn transmit<R: Rng + ?Sized>(symbols: &[f64], sigma: f64, rng: &mut R) -> Result<ReceivedWord, ChannelError> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(ChannelError::BadSigma(sigma));
    }
    let y = symbols
        .iter()
        .map(|&s| s + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(ReceivedWord { y, sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::invariant::hard_decision;

    #[test]
    fn modulation() {
        assert_eq!(bpsk_modulate(&[0, 0]), vec![1.0, 1.0]);
        assert_eq!(bpsk_modulate(&[1, 0, 1]), vec![-1.0, 1.0, -1.0]);
        let bits = [1u8, 1, 0, 1, 0, 0, 1];
        assert_eq!(hard_decision(&bpsk_modulate(&bits)), bits);
    }

    #[test]
    fn sigma_formula() {
        assert_eq!(ebno_to_sigma(0.0, 0.5).unwrap(), 1.0);
        let s = ebno_to_sigma(4.0, 0.5).unwrap();
        assert!((s - 10f64.powf(0.4).powf(-0.5)).abs() < 1e-15);
        assert!((s - 0.6310).abs() < 5e-5);
        assert!(ebno_to_sigma(1.0, 0.0).is_err());
        assert!(ebno_to_sigma(1.0, -0.5).is_err());
        assert!(ebno_to_sigma(1.0, 1.0).is_err());
    }

    #[test]
    fn sigma_is_strictly_decreasing() {
        let grid: Vec<f64> = (-10..=40).map(|i| i as f64 * 0.5).collect();
        for w in grid.windows(2) {
            assert!(ebno_to_sigma(w[1], 0.5).unwrap() < ebno_to_sigma(w[0], 0.5).unwrap());
        }
        for r in [0.1, 0.3, 0.5, 0.7] {
            assert!(ebno_to_sigma(3.0, r + 0.1).unwrap() < ebno_to_sigma(3.0, r).unwrap());
        }
    }

    #[test]
    fn vanishing_noise() {
        let mut rng = stream(1, 0);
        let x = bpsk_modulate(&[0, 1, 1, 0]);
        let r = transmit(&x, 1e-12, &mut rng).unwrap();
        for (a, b) in r.y.iter().zip(&x) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(transmit(&x, 0.0, &mut rng).is_err());
    }

    #[test]
    fn seeded_streams_repeat() {
        let x = vec![1.0; 64];
        let a = transmit(&x, 0.7, &mut stream(42, 3)).unwrap();
        let b = transmit(&x, 0.7, &mut stream(42, 3)).unwrap();
        assert_eq!(a, b);
        let c = transmit(&x, 0.7, &mut stream(42, 4)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn noise_moments() {
        // mean of 1e6 N(0, s^2) samples has std s/1000; +-0.005 is > 5 sigma
        let sigma = 0.8;
        let x = vec![1.0; 1_000_000];
        let r = transmit(&x, sigma, &mut stream(7, 0)).unwrap();
        let n = r.y.len() as f64;
        let mean = r.y.iter().map(|v| v - 1.0).sum::<f64>() / n;
        let var = r.y.iter().map(|v| (v - 1.0 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 0.005, "mean {mean}");
        assert!((var.sqrt() / sigma - 1.0).abs() < 0.01, "std {}", var.sqrt());
    }
}
