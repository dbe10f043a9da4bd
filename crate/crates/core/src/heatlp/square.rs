use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use statrs::function::gamma::gamma as gamma_fn;

use super::spectral::Spectral;
use super::timegrid::TimeGrid;
use crate::error::{Error, Result};
use crate::grid::SampledFunction;

/// Which family `Q_t` builds the square function.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "alpha")]
pub enum SquareFunctionKind {
    /// `Q_t = (tL)^{1/2} e^{-tL}`.
    Vertical,
    /// `Q_t = sqrt(t) ∇ e^{-tL}`.
    Gradient,
    /// `Q_t = Γ(α)^{-1} (tL)^α e^{-tL}`.
    General(f64),
}

impl SquareFunctionKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            SquareFunctionKind::General(a) if !(*a > 0.0 && a.is_finite()) => Err(
                Error::InvalidInput(format!("alpha must be positive, got {a}")),
            ),
            _ => Ok(()),
        }
    }

    /// Symbol of `Q_t` at angular frequency `xi`.
    pub fn multiplier(&self, t: f64, xi: f64) -> Complex64 {
        let u = t * xi * xi;
        let heat = (-u).exp();
        match *self {
            SquareFunctionKind::Vertical => Complex64::new(u.sqrt() * heat, 0.0),
            SquareFunctionKind::Gradient => Complex64::new(0.0, t.sqrt() * xi * heat),
            SquareFunctionKind::General(alpha) => {
                if u == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(u.powf(alpha) * heat / gamma_fn(alpha), 0.0)
                }
            }
        }
    }
}

/// `Q_t f` on the grid.
pub fn q_apply(kind: SquareFunctionKind, t: f64, f: &SampledFunction) -> Result<SampledFunction> {
    kind.validate()?;
    if !(t > 0.0) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    Spectral::new(f.len()).apply_multiplier(f, |xi| kind.multiplier(t, xi))
}

/// Result of a square-function evaluation.
#[derive(Debug, Clone, Serialize)]
pub struct SquareOutput {
    pub values: SampledFunction,
    /// Set when the time grid does not cover the active band of `f`.
    pub band_warning: bool,
}

/// Checks `t_min <= 0.01/xi_max^2` and `t_max >= 100/xi_min^2` over the
/// active (non-negligible) frequencies. Returns `true` when violated.
pub fn band_violation(spectral: &Spectral, coeffs: &[Complex64], grid: &TimeGrid) -> bool {
    let peak = coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
    if peak == 0.0 {
        return false;
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    for (j, c) in coeffs.iter().enumerate() {
        let xi = spectral.frequency(j).abs();
        if xi > 0.0 && c.norm() > 1e-10 * peak {
            lo = lo.min(xi);
            hi = hi.max(xi);
        }
    }
    if hi == 0.0 {
        return false;
    }
    grid.t_min > 0.01 / (hi * hi) || grid.t_max < 100.0 / (lo * lo)
}

/// Pointwise `t`-integrals of `|Q_t f|^2` (or `Q_t f · Q_t g`) against
/// `dt/t` over several windows, computed from one spectral pass.
#[derive(Debug, Clone)]
pub struct SquareEngine {
    spectral: Spectral,
    kind: SquareFunctionKind,
    grid: TimeGrid,
}

/// Nodes are processed in batches; inside a batch the transforms run in
/// parallel, and accumulation is sequential in ascending `t`.
const BATCH: usize = 32;

/// Smallest grid accepted for square-function computations.
pub const MIN_SQUARE_N: usize = 256;

impl SquareEngine {
    pub fn new(n: usize, kind: SquareFunctionKind, grid: TimeGrid) -> Result<Self> {
        kind.validate()?;
        if n < MIN_SQUARE_N {
            return Err(Error::InvalidGrid(format!(
                "square functions need N >= {MIN_SQUARE_N}, got {n}"
            )));
        }
        Ok(Self {
            spectral: Spectral::new(n),
            kind,
            grid,
        })
    }

    pub fn spectral(&self) -> &Spectral {
        &self.spectral
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn kind(&self) -> SquareFunctionKind {
        self.kind
    }

    fn q_from_coeffs(&self, coeffs: &[Complex64], t: f64) -> Vec<f64> {
        let kind = self.kind;
        self.spectral
            .inverse_with(coeffs, |xi| kind.multiplier(t, xi))
    }

    fn accumulate(
        &self,
        windows: &[(f64, f64)],
        pointwise: impl Fn(f64) -> Vec<f64> + Sync,
    ) -> Vec<Vec<f64>> {
        let n = self.spectral.len();
        let weights: Vec<Vec<f64>> = windows
            .iter()
            .map(|&(a, b)| self.grid.weights_in(a, b))
            .collect();
        let active: Vec<usize> = (0..self.grid.count)
            .filter(|&i| weights.iter().any(|w| w[i] > 0.0))
            .collect();
        let mut out = vec![vec![0.0; n]; windows.len()];
        for batch in active.chunks(BATCH) {
            let values: Vec<Vec<f64>> = batch
                .par_iter()
                .map(|&i| pointwise(self.grid.node(i)))
                .collect();
            for (&i, vals) in batch.iter().zip(&values) {
                for (acc, w) in out.iter_mut().zip(&weights) {
                    let wi = w[i];
                    if wi > 0.0 {
                        for (a, v) in acc.iter_mut().zip(vals) {
                            *a += wi * v;
                        }
                    }
                }
            }
        }
        out
    }

    /// `∫_a^b |Q_t f(x)|^2 dt/t` for each window `(a, b)`.
    pub fn squared_windows(&self, f: &SampledFunction, windows: &[(f64, f64)]) -> Vec<Vec<f64>> {
        let coeffs = self.spectral.forward(f);
        self.accumulate(windows, |t| {
            self.q_from_coeffs(&coeffs, t)
                .into_iter()
                .map(|v| v * v)
                .collect()
        })
    }

    /// `∫_a^b Q_t f(x) · Q_t g(x) dt/t` for each window.
    pub fn cross_windows(
        &self,
        f: &SampledFunction,
        g: &SampledFunction,
        windows: &[(f64, f64)],
    ) -> Vec<Vec<f64>> {
        let cf = self.spectral.forward(f);
        let cg = self.spectral.forward(g);
        self.accumulate(windows, |t| {
            let qf = self.q_from_coeffs(&cf, t);
            let qg = self.q_from_coeffs(&cg, t);
            qf.into_iter().zip(qg).map(|(a, b)| a * b).collect()
        })
    }

    /// `S^{[a,b]} f`, with the band-coverage flag.
    pub fn truncated(&self, f: &SampledFunction, a: f64, b: f64) -> Result<SquareOutput> {
        if f.len() != self.spectral.len() {
            return Err(Error::InvalidGrid(
                "function and engine grid sizes differ".into(),
            ));
        }
        if !(a >= 0.0) || b < a {
            return Err(Error::InvalidInput(format!(
                "invalid truncation window [{a}, {b}]"
            )));
        }
        let coeffs = self.spectral.forward(f);
        let band_warning = band_violation(&self.spectral, &coeffs, &self.grid);
        let sq = self.squared_windows(f, &[(a, b)]).remove(0);
        Ok(SquareOutput {
            values: SampledFunction::new(sq.into_iter().map(|v| v.max(0.0).sqrt()).collect())?,
            band_warning,
        })
    }

    pub fn full(&self, f: &SampledFunction) -> Result<SquareOutput> {
        self.truncated(f, 0.0, f64::INFINITY)
    }
}

/// `S f(x) = (∫_0^∞ |Q_t f(x)|^2 dt/t)^{1/2}` by quadrature on `grid`.
pub fn square_function(
    f: &SampledFunction,
    kind: SquareFunctionKind,
    grid: &TimeGrid,
) -> Result<SquareOutput> {
    SquareEngine::new(f.len(), kind, grid.clone())?.full(f)
}

/// `S^{[a,b]} f`: the `t`-integral restricted to `[a, b] ∩ [t_min, t_max]`.
pub fn truncated_square_function(
    f: &SampledFunction,
    kind: SquareFunctionKind,
    a: f64,
    b: f64,
    grid: &TimeGrid,
) -> Result<SquareOutput> {
    SquareEngine::new(f.len(), kind, grid.clone())?.truncated(f, a, b)
}

#[derive(Debug, Clone, Serialize)]
pub struct ReproducingReport {
    /// `||f - ∫ Q_t^{(α)} f dt/t||_2 / ||f||_2`.
    pub relative_error: f64,
    /// Set when `f` has a non-negligible mean, which `Q_t` annihilates.
    pub degenerate: bool,
    pub band_warning: bool,
}

/// Relative error of the reproducing formula `f = ∫_0^∞ Q_t^{(α)} f dt/t`.
pub fn reproducing_check(
    f: &SampledFunction,
    alpha: f64,
    grid: &TimeGrid,
) -> Result<ReproducingReport> {
    let kind = SquareFunctionKind::General(alpha);
    let engine = SquareEngine::new(f.len(), kind, grid.clone())?;
    let coeffs = engine.spectral.forward(f);
    let band_warning = band_violation(&engine.spectral, &coeffs, grid);
    let mut total = vec![0.0; f.len()];
    let weights = grid.weights();
    for (i, w) in weights.iter().enumerate() {
        let q = engine.q_from_coeffs(&coeffs, grid.node(i));
        for (acc, v) in total.iter_mut().zip(q) {
            *acc += w * v;
        }
    }
    let norm = f.l2_norm();
    if norm == 0.0 {
        return Err(Error::InvalidInput(
            "reproducing check needs a nonzero function".into(),
        ));
    }
    let diff: f64 = f
        .samples()
        .iter()
        .zip(&total)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / f.len() as f64;
    let degenerate = f.mean().abs() > 1e-12 * norm;
    Ok(ReproducingReport {
        relative_error: diff.sqrt() / norm,
        degenerate,
        band_warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::band_limited;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn constants_are_annihilated() {
        let f = SampledFunction::constant(256, 2.0).unwrap();
        for kind in [
            SquareFunctionKind::Vertical,
            SquareFunctionKind::Gradient,
            SquareFunctionKind::General(1.5),
        ] {
            let q = q_apply(kind, 0.01, &f).unwrap();
            assert!(q.samples().iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn vertical_single_mode_amplitude() {
        let f = SampledFunction::from_fn(256, |x| (2.0 * PI * x).cos()).unwrap();
        let t = 0.003;
        let u = t * 4.0 * PI * PI;
        let amp = u.sqrt() * (-u).exp();
        let q = q_apply(SquareFunctionKind::Vertical, t, &f).unwrap();
        for (a, b) in f.samples().iter().zip(q.samples()) {
            assert_relative_eq!(amp * a, b, epsilon = 1e-13);
        }
    }

    #[test]
    fn general_one_is_t_laplacian_heat() {
        let k = SquareFunctionKind::General(1.0);
        let (t, xi) = (0.02, 9.0);
        assert_relative_eq!(
            k.multiplier(t, xi).re,
            t * xi * xi * (-t * xi * xi).exp(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn zero_function() {
        let f = SampledFunction::zeros(256).unwrap();
        let s = square_function(&f, SquareFunctionKind::Vertical, &TimeGrid::default()).unwrap();
        assert!(s.values.samples().iter().all(|&v| v == 0.0));
        assert!(!s.band_warning);
    }

    #[test]
    fn plancherel_ratio() {
        let grid = TimeGrid::default();
        for seed in 0..3 {
            let f = band_limited(seed, 1024, 24).unwrap();
            for kind in [SquareFunctionKind::Vertical, SquareFunctionKind::Gradient] {
                let s = square_function(&f, kind, &grid).unwrap();
                assert!(!s.band_warning);
                let r = s.values.l2_norm() / f.l2_norm();
                assert!((r / 0.5f64.sqrt() - 1.0).abs() < 0.02, "ratio {r}");
            }
        }
    }

    #[test]
    fn truncation_windows() {
        let grid = TimeGrid::new(1e-7, 10.0, 200).unwrap();
        let f = band_limited(11, 512, 16).unwrap();
        let engine = SquareEngine::new(512, SquareFunctionKind::Vertical, grid.clone()).unwrap();
        let full = engine.full(&f).unwrap().values;
        let same = engine.truncated(&f, 0.0, f64::INFINITY).unwrap().values;
        assert_eq!(full, same);
        let none = engine.truncated(&f, 20.0, f64::INFINITY).unwrap().values;
        assert!(none.samples().iter().all(|&v| v == 0.0));
        let a = 1e-3;
        let parts = engine.squared_windows(&f, &[(0.0, a), (a, f64::INFINITY)]);
        for j in 0..512 {
            let s2 = full[j] * full[j];
            assert_relative_eq!(
                s2,
                parts[0][j] + parts[1][j],
                max_relative = 1e-10,
                epsilon = 1e-14
            );
            assert!(parts[1][j].sqrt() <= full[j] * (1.0 + 1e-12) + 1e-15);
        }
    }

    #[test]
    fn band_warning_fires_for_coarse_grids() {
        let f = band_limited(3, 256, 20).unwrap();
        let grid = TimeGrid::new(1e-3, 1.0, 50).unwrap();
        assert!(
            square_function(&f, SquareFunctionKind::Vertical, &grid)
                .unwrap()
                .band_warning
        );
    }

    #[test]
    fn reproducing_formula() {
        let f = SampledFunction::from_fn(256, |x| (2.0 * PI * x).cos()).unwrap();
        for alpha in [1.0, 2.0] {
            let r = reproducing_check(&f, alpha, &TimeGrid::default()).unwrap();
            assert!(r.relative_error < 1e-3, "alpha {alpha}: {r:?}");
            assert!(!r.degenerate);
        }
        let c = SampledFunction::constant(256, 1.0).unwrap();
        let r = reproducing_check(&c, 1.0, &TimeGrid::default()).unwrap();
        assert!(r.degenerate);
        assert_relative_eq!(r.relative_error, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_small_grids() {
        let r = SquareEngine::new(128, SquareFunctionKind::Vertical, TimeGrid::default());
        assert!(matches!(r, Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn sublinear_and_translation_equivariant() {
        let grid = TimeGrid::new(1e-6, 1e1, 120).unwrap();
        let f = band_limited(11, 256, 12).unwrap();
        let g = band_limited(12, 256, 12).unwrap();
        for kind in [SquareFunctionKind::Vertical, SquareFunctionKind::Gradient] {
            let sf = square_function(&f, kind, &grid).unwrap().values;
            let sg = square_function(&g, kind, &grid).unwrap().values;
            let sum = SampledFunction::new(
                f.samples()
                    .iter()
                    .zip(g.samples())
                    .map(|(a, b)| a + b)
                    .collect(),
            )
            .unwrap();
            let ssum = square_function(&sum, kind, &grid).unwrap().values;
            for j in 0..256 {
                assert!(ssum.samples()[j] <= sf.samples()[j] + sg.samples()[j] + 1e-12);
            }
            let shift = 37;
            let shifted = SampledFunction::new(
                (0..256)
                    .map(|j| f.samples()[(j + 256 - shift) % 256])
                    .collect(),
            )
            .unwrap();
            let ss = square_function(&shifted, kind, &grid).unwrap().values;
            for j in 0..256 {
                let expect = sf.samples()[(j + 256 - shift) % 256];
                assert!((ss.samples()[j] - expect).abs() <= 1e-10 * (1.0 + expect.abs()));
            }
        }
    }
}
