use crate::error::{Error, Result};
use crate::grid::{PeriodicPrefix, SampledFunction};
use crate::lattice::DyadicInterval;

use super::square::SquareEngine;

/// Left end of the `k`-th interval at `level` in the standard (`shifted =
/// false`) or one-third-shifted lattice.
pub fn lattice_lo(level: u32, k: u64, shifted: bool) -> f64 {
    let h = (-(level as f64)).exp2();
    let offset = if shifted {
        let sign = if level.is_multiple_of(2) { 1.0 } else { -1.0 };
        sign * h / 3.0
    } else {
        0.0
    };
    offset + k as f64 * h
}

/// Grid cells whose midpoints lie in `[lo, hi)`, as unwrapped indices.
fn cell_span(n: usize, lo: f64, hi: f64) -> std::ops::Range<i64> {
    let nf = n as f64;
    let start = (lo * nf - 0.5).ceil() as i64;
    let end = (hi * nf - 0.5).ceil() as i64;
    start..end
}

/// `M_p f(x) = sup (⨍_I |f|^p)^{1/p}` over the intervals `I` of the standard
/// and shifted dyadic lattices (read on the torus) that contain `x`, for
/// levels `0..=max_level`.
///
/// Averages are exact for the piecewise-constant extension of the samples;
/// `p = inf` takes the max over the cells of `I`.
pub fn hl_maximal_to_level(f: &SampledFunction, p: f64, max_level: u32) -> Result<SampledFunction> {
    if !(p >= 1.0) {
        return Err(Error::InvalidExponent(format!(
            "maximal exponent must be >= 1, got {p}"
        )));
    }
    let n = f.len();
    let ni = n as i64;
    let powered: Vec<f64> = if p.is_infinite() {
        f.samples().iter().map(|v| v.abs()).collect()
    } else {
        f.samples().iter().map(|v| v.abs().powf(p)).collect()
    };
    let prefix = PeriodicPrefix::new(&powered);
    let mut best = vec![0.0_f64; n];
    for level in 0..=max_level {
        let count = 1u64 << level;
        let side = (-(level as f64)).exp2();
        for shifted in [false, true] {
            if shifted && level == 0 {
                continue;
            }
            for k in 0..count {
                let lo = lattice_lo(level, k, shifted);
                let hi = lo + side;
                let span = cell_span(n, lo, hi);
                if span.is_empty() {
                    continue;
                }
                let value = if p.is_infinite() {
                    span.clone()
                        .map(|j| powered[j.rem_euclid(ni) as usize])
                        .fold(0.0_f64, f64::max)
                } else {
                    (prefix.integral(lo, hi) / side).max(0.0)
                };
                for j in span {
                    let c = &mut best[j.rem_euclid(ni) as usize];
                    if value > *c {
                        *c = value;
                    }
                }
            }
        }
    }
    if p.is_finite() {
        for v in best.iter_mut() {
            *v = v.powf(1.0 / p);
        }
    }
    SampledFunction::new(best)
}

/// [`hl_maximal_to_level`] down to the grid resolution.
pub fn hl_maximal(f: &SampledFunction, p: f64) -> Result<SampledFunction> {
    hl_maximal_to_level(f, p, f.level())
}

/// `S*_{Q0} f(x) = sup_{P ⊆ Q0, x ∈ P} (⨍_P (S^{[ℓ(P)^2, ∞)} f)^{q0})^{1/q0}`
/// over dyadic `P` down to the grid resolution; zero outside `Q0`.
///
/// `q0 = inf` takes the max of the truncated square function over `P`.
pub fn grand_maximal_s_star(
    engine: &SquareEngine,
    f: &SampledFunction,
    q0_cube: &DyadicInterval,
    q0: f64,
) -> Result<SampledFunction> {
    if !(q0 > 2.0) {
        return Err(Error::InvalidExponent(format!(
            "q0 must lie in (2, inf], got {q0}"
        )));
    }
    if f.len() != engine.spectral().len() {
        return Err(Error::InvalidGrid(
            "function and engine grid sizes differ".into(),
        ));
    }
    let grid_level = f.level();
    if q0_cube.level > grid_level {
        return Err(Error::InvalidGrid(format!(
            "cube {q0_cube} is finer than the grid (level {grid_level})"
        )));
    }
    let levels: Vec<u32> = (q0_cube.level..=grid_level).collect();
    let windows: Vec<(f64, f64)> = levels
        .iter()
        .map(|&l| ((-2.0 * l as f64).exp2(), f64::INFINITY))
        .collect();
    let squared = engine.squared_windows(f, &windows);
    let (first, len) = q0_cube.cells(grid_level)?;
    let mut out = vec![0.0_f64; f.len()];
    for (&level, sq) in levels.iter().zip(&squared) {
        let width = 1usize << (grid_level - level);
        for start in (first..first + len).step_by(width) {
            let cells = &sq[start..start + width];
            let value = if q0.is_infinite() {
                cells.iter().fold(0.0_f64, |m, &v| m.max(v.max(0.0).sqrt()))
            } else {
                let mean = cells
                    .iter()
                    .map(|&v| v.max(0.0).powf(0.5 * q0))
                    .sum::<f64>()
                    / width as f64;
                mean.powf(1.0 / q0)
            };
            for c in &mut out[start..start + width] {
                if value > *c {
                    *c = value;
                }
            }
        }
    }
    SampledFunction::new(out)
}

/// Smallest `C` with `|{|v| > λ}| <= C (norm / λ)^p` for every `λ`, reading
/// each sample as one cell of measure `1/N`.
pub fn weak_type_constant(values: &SampledFunction, norm: f64, p: f64) -> Result<f64> {
    if !(norm > 0.0) || !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "weak-type constant needs norm > 0 and finite p >= 1, got {norm}, {p}"
        )));
    }
    let mut v: Vec<f64> = values.samples().iter().map(|x| x.abs()).collect();
    v.sort_by(|a, b| b.total_cmp(a));
    let n = v.len() as f64;
    Ok(v.iter()
        .enumerate()
        .map(|(k, &x)| (x / norm).powf(p) * (k + 1) as f64 / n)
        .fold(0.0, f64::max))
}
