//! Uniform periodic sampling of functions on the unit torus.

use serde::Serialize;

use crate::error::{Error, Result};

/// Real samples `f(x_j)` at the cell midpoints `x_j = (j + 1/2)/N` of the
/// periodic interval `[0, 1)`; `N` is a power of two.
///
/// Each sample owns the cell `[j/N, (j+1)/N)`, so integrals are midpoint sums
/// and piecewise-constant functions are integrated exactly.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledFunction {
    samples: Vec<f64>,
}

impl SampledFunction {
    pub fn new(samples: Vec<f64>) -> Result<Self> {
        let n = samples.len();
        if n < 2 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "sample count must be a power of two >= 2, got {n}"
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("samples must be finite".into()));
        }
        Ok(Self { samples })
    }

    pub fn from_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let h = 1.0 / n as f64;
        Self::new((0..n).map(|j| f((j as f64 + 0.5) * h)).collect())
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::constant(n, 0.0)
    }

    /// Indicator of `[lo, hi)` (cell-midpoint membership, no wrap).
    pub fn indicator(n: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::from_fn(n, |x| if x >= lo && x < hi { 1.0 } else { 0.0 })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `log2 N`: the dyadic level of one grid cell.
    pub fn level(&self) -> u32 {
        self.samples.len().trailing_zeros()
    }

    pub fn cell_width(&self) -> f64 {
        1.0 / self.samples.len() as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.cell_width()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            samples: self.samples.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs)
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_same_grid(other)?;
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Multiplies by a cell mask (`false` cells become zero).
    pub fn masked(&self, mask: &[bool]) -> Result<Self> {
        if mask.len() != self.len() {
            return Err(Error::InvalidGrid("mask length differs from grid".into()));
        }
        Ok(Self {
            samples: self
                .samples
                .iter()
                .zip(mask)
                .map(|(&v, &keep)| if keep { v } else { 0.0 })
                .collect(),
        })
    }

    /// Periodic shift by `cells` grid cells: `g(x) = f(x - cells/N)`.
    pub fn shifted(&self, cells: isize) -> Self {
        let n = self.len() as isize;
        let samples = (0..n)
            .map(|j| self.samples[(j - cells).rem_euclid(n) as usize])
            .collect();
        Self { samples }
    }

    pub fn check_same_grid(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::InvalidGrid(format!(
                "grid sizes differ: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }

    /// `∫_0^1 f`, midpoint rule, left-to-right summation.
    pub fn integral(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.cell_width()
    }

    pub fn mean(&self) -> f64 {
        self.integral()
    }

    /// `(∫ |f|^p)^{1/p}`; `p = inf` gives the max norm.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p.is_infinite() {
            return self.samples.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        }
        let s: f64 = self.samples.iter().map(|v| v.abs().powf(p)).sum();
        (s * self.cell_width()).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        let s: f64 = self.samples.iter().map(|v| v * v).sum();
        (s * self.cell_width()).sqrt()
    }

    pub fn max(&self) -> f64 {
        self.samples
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

impl std::ops::Index<usize> for SampledFunction {
    type Output = f64;

    fn index(&self, j: usize) -> &f64 {
        &self.samples[j]
    }
}

/// Prefix sums of a sample vector, read periodically.
///
/// `range_sum(start, len)` sums `len` consecutive cells starting at `start`
/// (any integer, wrapped); a length beyond `N` counts full periods again.
#[derive(Debug, Clone)]
pub struct PeriodicPrefix {
    prefix: Vec<f64>,
}

impl PeriodicPrefix {
    pub fn new(values: &[f64]) -> Self {
        let mut prefix = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        prefix.push(acc);
        for v in values {
            acc += v;
            prefix.push(acc);
        }
        Self { prefix }
    }

    pub fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn total(&self) -> f64 {
        self.prefix[self.len()]
    }

    /// Sum of the cells `start .. start + len` taken modulo `N`.
    pub fn range_sum(&self, start: i64, len: usize) -> f64 {
        let n = self.len();
        let full = len / n;
        let rest = len % n;
        let s = start.rem_euclid(n as i64) as usize;
        let mut acc = full as f64 * self.total();
        if s + rest <= n {
            acc += self.prefix[s + rest] - self.prefix[s];
        } else {
            acc += self.prefix[n] - self.prefix[s] + self.prefix[s + rest - n];
        }
        acc
    }

    /// `∫_lo^hi` of the piecewise-constant function whose cell values were
    /// summed, with periodic extension and exact partial cells.
    pub fn integral(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        let n = self.len() as f64;
        self.cumulative(hi * n) / n - self.cumulative(lo * n) / n
    }

    /// `∫_0^{u}` in cell units (u measured in cells, any real).
    fn cumulative(&self, u: f64) -> f64 {
        let n = self.len();
        let period = (u / n as f64).floor();
        let r = u - period * n as f64;
        let k = (r.floor() as usize).min(n - 1);
        let frac = r - k as f64;
        let cell = self.prefix[k + 1] - self.prefix[k];
        period * self.total() + self.prefix[k] + frac * cell
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rejects_non_power_of_two() {
        assert!(SampledFunction::new(vec![0.0; 6]).is_err());
        assert!(SampledFunction::new(vec![0.0; 8]).is_ok());
    }

    #[test]
    fn norms() {
        let f = SampledFunction::constant(16, -3.0).unwrap();
        assert_relative_eq!(f.l2_norm(), 3.0);
        assert_relative_eq!(f.lp_norm(1.0), 3.0);
        assert_eq!(f.lp_norm(f64::INFINITY), 3.0);
    }

    #[test]
    fn prefix_wraps() {
        let values: Vec<f64> = (0..8).map(|v| v as f64).collect();
        let pre = PeriodicPrefix::new(&values);
        assert_eq!(pre.range_sum(6, 4), 6.0 + 7.0 + 0.0 + 1.0);
        assert_eq!(pre.range_sum(-2, 3), 6.0 + 7.0 + 0.0);
        assert_eq!(pre.range_sum(0, 16), 2.0 * 28.0);
    }

    #[test]
    fn prefix_partial_cells() {
        let pre = PeriodicPrefix::new(&[1.0, 3.0, 5.0, 7.0]);
        // cell width 1/4; [1/8, 3/8] covers half of cell 0 and half of cell 1
        assert_relative_eq!(pre.integral(0.125, 0.375), (0.5 * 1.0 + 0.5 * 3.0) / 4.0);
        // wrapped: [-1/4, 1/4] = cell 3 + cell 0
        assert_relative_eq!(pre.integral(-0.25, 0.25), (7.0 + 1.0) / 4.0);
    }

    #[test]
    fn shift_is_periodic() {
        let f = SampledFunction::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(f.shifted(1).samples(), &[4.0, 1.0, 2.0, 3.0]);
        assert_eq!(f.shifted(-5).samples(), &[2.0, 3.0, 4.0, 1.0]);
    }
}
