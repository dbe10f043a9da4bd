use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::Result;
use crate::grid::SampledFunction;

/// Forward and inverse transforms for one grid size.
///
/// Plans are immutable once built and can be shared across threads.
#[derive(Clone)]
pub struct Spectral {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral").field("n", &self.n).finish()
    }
}

impl Spectral {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Signed angular frequency `xi_j = 2 pi k_j` of bin `j`; the Nyquist bin
    /// takes `k = N/2`.
    pub fn frequency(&self, j: usize) -> f64 {
        let k = if j <= self.n / 2 {
            j as f64
        } else {
            j as f64 - self.n as f64
        };
        2.0 * PI * k
    }

    pub fn frequencies(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.frequency(j)).collect()
    }

    /// Unnormalised DFT coefficients.
    pub fn forward(&self, f: &SampledFunction) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = f
            .samples()
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.forward.process(&mut buf);
        buf
    }

    /// Real part of the inverse transform of `coeffs · m(xi)`.
    pub fn inverse_with(&self, coeffs: &[Complex64], m: impl Fn(f64) -> Complex64) -> Vec<f64> {
        let mut buf: Vec<Complex64> = coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * m(self.frequency(j)))
            .collect();
        self.inverse.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.into_iter().map(|c| c.re * scale).collect()
    }

    /// `m(sqrt(-Δ))`-type operator: multiply the spectrum by `m(xi)`.
    pub fn apply_multiplier(
        &self,
        f: &SampledFunction,
        m: impl Fn(f64) -> Complex64,
    ) -> Result<SampledFunction> {
        let coeffs = self.forward(f);
        SampledFunction::new(self.inverse_with(&coeffs, m))
    }
}

/// One-shot convenience wrapper around [`Spectral::apply_multiplier`].
pub fn apply_multiplier(
    f: &SampledFunction,
    m: impl Fn(f64) -> Complex64,
) -> Result<SampledFunction> {
    Spectral::new(f.len()).apply_multiplier(f, m)
}

/// The heat semigroup `e^{tΔ}` on the torus.
pub fn heat(f: &SampledFunction, t: f64) -> Result<SampledFunction> {
    apply_multiplier(f, |xi| Complex64::new((-t * xi * xi).exp(), 0.0))
}
