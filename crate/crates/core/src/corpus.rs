//! Deterministic test functions on the torus.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid::SampledFunction;

/// Mean-zero trigonometric polynomial `Σ_{1<=k<=k_max} a_k cos(2πkx) +
/// b_k sin(2πkx)` with coefficients drawn uniformly from `[-1, 1]/k`.
pub fn band_limited(seed: u64, n: usize, k_max: usize) -> Result<SampledFunction> {
    if k_max == 0 || 2 * k_max >= n {
        return Err(Error::InvalidInput(format!(
            "band limit {k_max} must lie in 1..{}",
            n / 2
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs: Vec<(f64, f64)> = (1..=k_max)
        .map(|k| {
            let s = 1.0 / k as f64;
            (rng.gen_range(-1.0..1.0) * s, rng.gen_range(-1.0..1.0) * s)
        })
        .collect();
    SampledFunction::from_fn(n, |x| {
        coeffs
            .iter()
            .enumerate()
            .map(|(i, (a, b))| {
                let w = 2.0 * PI * (i + 1) as f64 * x;
                a * w.cos() + b * w.sin()
            })
            .sum()
    })
}

/// Periodic Gaussian bump `e^{-dist(x, c)^2 / (2 w^2)}`.
pub fn bump(n: usize, center: f64, width: f64) -> Result<SampledFunction> {
    SampledFunction::from_fn(n, |x| {
        let d = (x - center).rem_euclid(1.0);
        let d = d.min(1.0 - d);
        (-d * d / (2.0 * width * width)).exp()
    })
}

/// Seeded family of inputs for the maximal-function and sparse checks.
#[derive(Debug, Clone)]
pub struct Corpus {
    seed: u64,
    n: usize,
}

impl Corpus {
    pub fn new(seed: u64, n: usize) -> Self {
        Self { seed, n }
    }

    /// Signed inputs `f`: band-limited polynomials, an indicator, a
    /// mean-zero spike pair and a narrow bump.
    pub fn functions(&self) -> Vec<SampledFunction> {
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut out = Vec::new();
        for k_max in [4, 16, 32] {
            if 2 * k_max < n {
                out.push(band_limited(rng.gen(), n, k_max).expect("valid band"));
            }
        }
        let lo: f64 = rng.gen_range(0.0..0.75);
        out.push(SampledFunction::indicator(n, lo, lo + 0.25).expect("valid grid"));
        let mut spikes = vec![0.0; n];
        let a = rng.gen_range(0..n);
        spikes[a] = n as f64;
        spikes[(a + n / 3) % n] = -(n as f64);
        out.push(SampledFunction::new(spikes).expect("valid grid"));
        let c: f64 = rng.gen();
        out.push(bump(n, c, 0.02).expect("valid grid"));
        out
    }

    /// Nonnegative test functions `g`: smooth bumps and a constant.
    pub fn test_functions(&self) -> Vec<SampledFunction> {
        let n = self.n;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut out = vec![SampledFunction::constant(n, 1.0).expect("valid grid")];
        for width in [0.05, 0.15] {
            let c: f64 = rng.gen();
            out.push(bump(n, c, width).expect("valid grid"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_limited_is_mean_zero_and_seeded() {
        let f = band_limited(1, 256, 16).unwrap();
        assert!(f.mean().abs() < 1e-12);
        assert_eq!(f, band_limited(1, 256, 16).unwrap());
        assert_ne!(f, band_limited(2, 256, 16).unwrap());
        assert!(band_limited(1, 16, 8).is_err());
    }

    #[test]
    fn corpus_is_deterministic() {
        let a = Corpus::new(4, 128).functions();
        let b = Corpus::new(4, 128).functions();
        assert_eq!(a, b);
        assert!(Corpus::new(4, 128)
            .test_functions()
            .iter()
            .all(|g| g.samples().iter().all(|&v| v >= 0.0)));
    }
}
