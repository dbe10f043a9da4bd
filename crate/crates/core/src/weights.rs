//! Muckenhoupt `A_p` and reverse Hölder `RH_q` characteristics.
//!
//! A characteristic is a supremum over all intervals; here it is the maximum
//! over a [`ScanFamily`] of candidate intervals, which makes every reported
//! value a lower bound of the true supremum. Power weights `x^a` have their
//! extremal intervals anchored at the singularity, and the scan contains the
//! anchored intervals `[0, 2^-n]`, so for them the scan value is exact.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{conj, phi, rh_index};
use crate::grid::{PeriodicPrefix, SampledFunction};
use crate::lattice::{DyadicInterval, Interval};

/// Tolerance for exact identities between characteristics.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Tolerance for grid values compared against closed forms.
pub const GRID_TOL: f64 = 5e-2;

/// A positive weight on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Weight {
    /// `x^a` with `a > -1`.
    Power { exponent: f64 },
    /// Strictly positive midpoint samples.
    Grid { samples: SampledFunction },
}

/// `⨍_{[0,b]} x^a dx = b^a/(a+1)`.
pub fn power_avg(a: f64, b: f64) -> Result<f64> {
    if !(a > -1.0) {
        return Err(Error::Divergent(format!(
            "∫_0^b x^a dx diverges for a = {a} <= -1"
        )));
    }
    if !(b > 0.0) {
        return Err(Error::InvalidInput(format!(
            "interval length must be positive, got {b}"
        )));
    }
    Ok(b.powf(a) / (a + 1.0))
}

/// `⨍_{[u,v]} x^c dx` for `0 <= u < v`, stable when `v/u` is close to 1.
fn power_interval_avg(c: f64, u: f64, v: f64) -> f64 {
    if u <= 0.0 {
        return v.powf(c) / (c + 1.0);
    }
    let e = c + 1.0;
    let log_ratio = ((v - u) / u).ln_1p();
    let diff = if e.abs() < 1e-300 {
        log_ratio
    } else {
        u.powf(e) * (e * log_ratio).exp_m1() / e
    };
    diff / (v - u)
}

impl Weight {
    pub fn power(exponent: f64) -> Result<Self> {
        if !(exponent > -1.0) || !exponent.is_finite() {
            return Err(Error::InvalidWeight(format!(
                "power weight x^a needs a > -1 for local integrability, got a = {exponent}"
            )));
        }
        Ok(Weight::Power { exponent })
    }

    pub fn grid(samples: SampledFunction) -> Result<Self> {
        if samples.samples().iter().any(|&v| !(v > 0.0)) {
            return Err(Error::InvalidWeight(
                "grid weight samples must be strictly positive".into(),
            ));
        }
        Ok(Weight::Grid { samples })
    }

    pub fn unit() -> Self {
        Weight::Power { exponent: 0.0 }
    }

    /// Pointwise power `w^s`. Power weights check `a s > -1`.
    pub fn pow(&self, s: f64) -> Result<Self> {
        match self {
            Weight::Power { exponent } => {
                let e = exponent * s;
                if !(e > -1.0) {
                    return Err(Error::Divergent(format!(
                        "x^({exponent})^{s} = x^{e} is not integrable at 0 (needs {exponent}·{s} > -1)"
                    )));
                }
                Ok(Weight::Power { exponent: e })
            }
            Weight::Grid { samples } => Ok(Weight::Grid {
                samples: samples.map(|v| v.powf(s)),
            }),
        }
    }

    fn label(&self) -> String {
        match self {
            Weight::Power { exponent } => format!("x^{exponent}"),
            Weight::Grid { samples } => format!("grid[{}]", samples.len()),
        }
    }
}

/// Candidate intervals for characteristic suprema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanFamily {
    /// Dyadic levels `0..=max_depth` of the standard lattice.
    pub max_depth: u32,
    /// Anchored intervals `[0, 2^-n]`, `n <= anchored_depth`.
    pub anchored_depth: u32,
    /// Include the third-shifted lattice (intervals inside `[0, 1]` only).
    pub shifted: bool,
}

impl Default for ScanFamily {
    fn default() -> Self {
        Self {
            max_depth: 12,
            anchored_depth: 48,
            shifted: true,
        }
    }
}

impl ScanFamily {
    pub fn anchored_only(depth: u32) -> Self {
        Self {
            max_depth: 0,
            anchored_depth: depth,
            shifted: false,
        }
    }

    /// Candidates in canonical order: standard lattice by `(level, index)`,
    /// then anchored intervals beyond `max_depth`, then the shifted lattice.
    pub fn candidates(&self) -> Vec<Interval> {
        let mut out: Vec<Interval> = (0..=self.max_depth)
            .flat_map(DyadicInterval::level_iter)
            .map(|q| q.interval())
            .collect();
        for n in (self.max_depth + 1)..=self.anchored_depth {
            out.push(Interval::new(0.0, (-(n as f64)).exp2()));
        }
        if self.shifted {
            for level in 1..=self.max_depth {
                let side = (-(level as f64)).exp2();
                let sign = if level % 2 == 0 { 1.0 } else { -1.0 };
                let offset = sign * side / 3.0;
                let count = 1i64 << level;
                for k in -1..=count {
                    let lo = k as f64 * side + offset;
                    let hi = lo + side;
                    if lo >= 0.0 && hi <= 1.0 {
                        out.push(Interval::new(lo, hi));
                    }
                }
            }
        }
        out
    }
}

/// Averages of `w^c` over candidate intervals.
enum Averager {
    Power(f64),
    Grid {
        n: usize,
        prefix: Vec<(f64, PeriodicPrefix)>,
    },
}

impl Averager {
    /// `powers` lists every `c` that will be averaged.
    fn new(w: &Weight, powers: &[f64]) -> Self {
        match w {
            Weight::Power { exponent } => Averager::Power(*exponent),
            Weight::Grid { samples } => Averager::Grid {
                n: samples.len(),
                prefix: powers
                    .iter()
                    .map(|&c| {
                        let v: Vec<f64> = samples.samples().iter().map(|x| x.powf(c)).collect();
                        (c, PeriodicPrefix::new(&v))
                    })
                    .collect(),
            },
        }
    }

    /// `⨍_I w^c`, or `None` when `I` holds no grid cell.
    fn avg(&self, c: f64, i: &Interval) -> Option<f64> {
        match self {
            Averager::Power(a) => Some(power_interval_avg(a * c, i.lo, i.hi)),
            Averager::Grid { n, prefix } => {
                let start = (i.lo * *n as f64).round() as i64;
                let end = (i.hi * *n as f64).round() as i64;
                if end <= start {
                    return None;
                }
                let len = (end - start) as usize;
                let pre = &prefix.iter().find(|(p, _)| *p == c)?.1;
                Some(pre.range_sum(start, len) / len as f64)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Characteristic {
    pub value: f64,
    pub argmax: Interval,
}

fn scan_max(
    scan: &ScanFamily,
    mut quotient: impl FnMut(&Interval) -> Option<f64>,
) -> Result<Characteristic> {
    let mut best: Option<Characteristic> = None;
    for cand in scan.candidates() {
        if let Some(q) = quotient(&cand) {
            if !q.is_finite() {
                return Err(Error::Divergent(format!(
                    "characteristic quotient not finite on {cand}"
                )));
            }
            if best.as_ref().is_none_or(|b| q > b.value) {
                best = Some(Characteristic {
                    value: q,
                    argmax: cand,
                });
            }
        }
    }
    best.ok_or_else(|| Error::InvalidInput("scan family produced no admissible interval".into()))
}

fn check_ap_integrability(w: &Weight, p: f64) -> Result<f64> {
    if !(p > 1.0) || p.is_infinite() {
        return Err(Error::InvalidExponent(format!(
            "A_p needs 1 < p < inf, got {p}"
        )));
    }
    let dual = 1.0 - conj(p)?;
    if let Weight::Power { exponent } = w {
        if !(exponent * dual > -1.0) {
            return Err(Error::Divergent(format!(
                "dual weight x^({exponent}·(1-p')) = x^{} is not integrable at 0 (A_{p} needs a(1-p') > -1)",
                exponent * dual
            )));
        }
    }
    Ok(dual)
}

/// `⨍_Q w (⨍_Q w^{1-p'})^{p-1}` maximised over the scan family.
pub fn ap_characteristic(w: &Weight, p: f64, scan: &ScanFamily) -> Result<Characteristic> {
    let dual = check_ap_integrability(w, p)?;
    let avg = Averager::new(w, &[1.0, dual]);
    scan_max(scan, |i| {
        Some(avg.avg(1.0, i)? * avg.avg(dual, i)?.powf(p - 1.0))
    })
}

/// Closed-form `A_p` quotient of `x^a` on any anchored interval `[0, b]`:
/// `1/((a+1)((1-p')a+1)^{p-1})`, independent of `b`.
pub fn ap_anchored(a: f64, p: f64) -> Result<f64> {
    let w = Weight::power(a)?;
    let dual = check_ap_integrability(&w, p)?;
    Ok(1.0 / ((a + 1.0) * (dual * a + 1.0).powf(p - 1.0)))
}

fn check_rh(w: &Weight, q: f64) -> Result<()> {
    if !(q >= 1.0) || q.is_infinite() {
        return Err(Error::InvalidExponent(format!(
            "RH_q needs 1 <= q < inf, got {q}"
        )));
    }
    if let Weight::Power { exponent } = w {
        if !(exponent * q > -1.0) {
            return Err(Error::Divergent(format!(
                "x^({exponent}·{q}) is not integrable at 0 (RH_{q} needs aq > -1)"
            )));
        }
    }
    Ok(())
}

/// `(⨍_Q w^q)^{1/q} / ⨍_Q w` maximised over the scan family; `RH_1 ≡ 1`.
pub fn rh_characteristic(w: &Weight, q: f64, scan: &ScanFamily) -> Result<Characteristic> {
    check_rh(w, q)?;
    if q == 1.0 {
        return Ok(Characteristic {
            value: 1.0,
            argmax: Interval::new(0.0, 1.0),
        });
    }
    let avg = Averager::new(w, &[1.0, q]);
    scan_max(scan, |i| {
        Some(avg.avg(q, i)?.powf(1.0 / q) / avg.avg(1.0, i)?)
    })
}

/// Closed-form anchored `RH_q` quotient of `x^a`: `(a+1)/(aq+1)^{1/q}`.
pub fn rh_anchored(a: f64, q: f64) -> Result<f64> {
    let w = Weight::power(a)?;
    check_rh(&w, q)?;
    if q == 1.0 {
        return Ok(1.0);
    }
    Ok((a + 1.0) / (a * q + 1.0).powf(1.0 / q))
}

/// The `A_p` dual weight `w^{1-p'}`.
pub fn dual_weight(w: &Weight, p: f64) -> Result<Weight> {
    let dual = check_ap_integrability(w, p)?;
    w.pow(dual)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassProductReport {
    pub weight: String,
    /// `[w^s]_{A_phi(p)}` with `s = (q0/p)'`.
    pub lhs: f64,
    /// `([w]_{A_{p/p0}} [w]_{RH_s})^s`.
    pub rhs: f64,
    pub ap: f64,
    pub rh: f64,
    pub s: f64,
    pub phi: f64,
    pub ok: bool,
}

/// Compares both sides of the class-product bound
/// `[w^s]_{A_phi(p)} <= ([w]_{A_{p/p0}} [w]_{RH_s})^s` on the scan family.
pub fn class_product_bound(
    w: &Weight,
    p0: f64,
    q0: f64,
    p: f64,
    scan: &ScanFamily,
) -> Result<ClassProductReport> {
    let s = rh_index(q0, p)?;
    let phi_p = phi(p0, q0, p)?;
    let lhs = ap_characteristic(&w.pow(s)?, phi_p, scan)?.value;
    let ap = ap_characteristic(w, p / p0, scan)?.value;
    let rh = rh_characteristic(w, s, scan)?.value;
    let rhs = (ap * rh).powf(s);
    Ok(ClassProductReport {
        weight: w.label(),
        lhs,
        rhs,
        ap,
        rh,
        s,
        phi: phi_p,
        ok: lhs <= rhs * (1.0 + IDENTITY_TOL),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Dense oracle: every interval `[i/m, j/m]`, closed-form power averages.
    fn dense_ap_power(a: f64, p: f64, m: usize) -> f64 {
        let dual = 1.0 - p / (p - 1.0);
        let avg = |c: f64, u: f64, v: f64| {
            let e = c + 1.0;
            (v.powf(e) - u.powf(e)) / (e * (v - u))
        };
        let mut best = 0.0_f64;
        for i in 0..m {
            for j in (i + 1)..=m {
                let (u, v) = (i as f64 / m as f64, j as f64 / m as f64);
                let q = avg(a, u, v) * avg(a * dual, u, v).powf(p - 1.0);
                best = best.max(q);
            }
        }
        best
    }

    #[test]
    fn power_avg_examples() {
        assert_relative_eq!(power_avg(0.0, 0.3).unwrap(), 1.0);
        assert_relative_eq!(power_avg(1.0, 1.0).unwrap(), 0.5);
        assert_relative_eq!(power_avg(-0.5, 1.0 / 16.0).unwrap(), 8.0, epsilon = 1e-12);
        assert!(matches!(power_avg(-1.0, 0.5), Err(Error::Divergent(_))));
    }

    #[test]
    fn unit_weight_characteristics() {
        let scan = ScanFamily::default();
        assert_relative_eq!(
            ap_characteristic(&Weight::unit(), 2.0, &scan)
                .unwrap()
                .value,
            1.0,
            epsilon = 1e-12
        );
        for q in [1.0, 1.5, 4.0] {
            assert_relative_eq!(
                rh_characteristic(&Weight::unit(), q, &scan).unwrap().value,
                1.0,
                epsilon = 1e-12
            );
        }
        let flat = Weight::grid(SampledFunction::constant(256, 2.5).unwrap()).unwrap();
        assert_relative_eq!(
            ap_characteristic(&flat, 3.0, &scan).unwrap().value,
            1.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn sqrt_weight_a2() {
        let w = Weight::power(0.5).unwrap();
        assert_relative_eq!(ap_anchored(0.5, 2.0).unwrap(), 4.0 / 3.0, epsilon = 1e-14);
        let scan = ap_characteristic(&w, 2.0, &ScanFamily::default()).unwrap();
        assert!(scan.value >= 4.0 / 3.0 * (1.0 - 1e-12));
        let dense = dense_ap_power(0.5, 2.0, 128);
        assert!(dense <= 4.0 / 3.0 * (1.0 + 1e-9));
        assert_relative_eq!(scan.value, 4.0 / 3.0, max_relative = 1e-9);
        assert_eq!(scan.argmax.lo, 0.0);
    }

    #[test]
    fn rh_closed_form() {
        assert_relative_eq!(
            rh_anchored(1.0, 2.0).unwrap(),
            2.0 / 3f64.sqrt(),
            epsilon = 1e-14
        );
        let scan =
            rh_characteristic(&Weight::power(1.0).unwrap(), 2.0, &ScanFamily::default()).unwrap();
        assert_relative_eq!(scan.value, 2.0 / 3f64.sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn dual_integrability_is_checked() {
        // a(1-p') = 2·(-1) = -2 <= -1
        let err = ap_characteristic(&Weight::power(2.0).unwrap(), 2.0, &ScanFamily::default())
            .unwrap_err();
        assert!(matches!(err, Error::Divergent(ref m) if m.contains("a(1-p')")));
        assert!(Weight::power(-1.0).is_err());
        assert!(
            rh_characteristic(&Weight::power(-0.6).unwrap(), 2.0, &ScanFamily::default()).is_err()
        );
    }

    #[test]
    fn dual_weights() {
        assert_eq!(
            dual_weight(&Weight::unit(), 3.0).unwrap(),
            Weight::Power { exponent: 0.0 }
        );
        assert_eq!(
            dual_weight(&Weight::power(0.5).unwrap(), 2.0).unwrap(),
            Weight::Power { exponent: -0.5 }
        );
        let scan = ScanFamily::default();
        let a = ap_characteristic(&Weight::power(0.5).unwrap(), 2.0, &scan)
            .unwrap()
            .value;
        let b = ap_characteristic(&Weight::power(-0.5).unwrap(), 2.0, &scan)
            .unwrap()
            .value;
        assert!((a / b - 1.0).abs() < 0.01);
    }

    #[test]
    fn class_product_examples() {
        let scan = ScanFamily::default();
        let r = class_product_bound(&Weight::unit(), 1.0, 4.0, 3.0, &scan).unwrap();
        assert_relative_eq!(r.lhs, 1.0, epsilon = 1e-12);
        assert_relative_eq!(r.rhs, 1.0, epsilon = 1e-12);
        assert!(r.ok);
        let r = class_product_bound(&Weight::power(0.3).unwrap(), 1.0, 4.0, 3.0, &scan).unwrap();
        assert!(r.ok, "{r:?}");
        for k in 4..12 {
            let eps = (-(k as f64)).exp2();
            let p = 2.2;
            let w = Weight::power(p - 1.0 - eps).unwrap();
            let r = class_product_bound(&w, 1.0, 4.0, p, &scan).unwrap();
            assert!(r.ok, "eps = {eps}: {r:?}");
        }
    }

    #[test]
    fn grid_weight_tracks_closed_form() {
        let a = 0.5;
        let w = Weight::grid(SampledFunction::from_fn(1 << 14, |x| x.powf(a)).unwrap()).unwrap();
        let scan = ScanFamily {
            max_depth: 8,
            anchored_depth: 8,
            shifted: true,
        };
        let grid = ap_characteristic(&w, 2.0, &scan).unwrap().value;
        let exact = ap_anchored(a, 2.0).unwrap();
        assert!(
            (grid / exact - 1.0).abs() < GRID_TOL,
            "grid {grid} exact {exact}"
        );
    }

    #[test]
    fn shifted_candidates_stay_inside() {
        for c in ScanFamily::default().candidates() {
            assert!(c.lo >= 0.0 && c.hi <= 1.0 && c.hi > c.lo);
        }
    }

    proptest! {
        #[test]
        fn characteristics_are_at_least_one(a in -0.6f64..3.0, p in 1.2f64..6.0, q in 1.0f64..1.6) {
            let scan = ScanFamily { max_depth: 6, anchored_depth: 20, shifted: true };
            let w = Weight::power(a).unwrap();
            if let Ok(c) = ap_characteristic(&w, p, &scan) {
                prop_assert!(c.value >= 1.0 - 1e-12);
            }
            if let Ok(c) = rh_characteristic(&w, q, &scan) {
                prop_assert!(c.value >= 1.0 - 1e-12);
            }
        }

        #[test]
        fn ap_decreases_in_p(a in -0.5f64..2.0, p1 in 1.5f64..4.0, dp in 0.0f64..3.0) {
            let scan = ScanFamily { max_depth: 6, anchored_depth: 20, shifted: true };
            let w = Weight::power(a).unwrap();
            if let (Ok(c1), Ok(c2)) = (ap_characteristic(&w, p1, &scan), ap_characteristic(&w, p1 + dp, &scan)) {
                prop_assert!(c2.value <= c1.value * (1.0 + 1e-12));
            }
        }

        #[test]
        fn anchored_quotient_is_scale_invariant(a in -0.5f64..2.0, p in 1.5f64..5.0) {
            let w = Weight::power(a).unwrap();
            if let Ok(closed) = ap_anchored(a, p) {
                let avg = Averager::new(&w, &[]);
                let dual = 1.0 - p / (p - 1.0);
                for n in 0..30 {
                    let i = Interval::new(0.0, (-(n as f64)).exp2());
                    let q = avg.avg(1.0, &i).unwrap() * avg.avg(dual, &i).unwrap().powf(p - 1.0);
                    prop_assert!((q / closed - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn anchored_duality_is_exact(a in -0.5f64..2.0, p in 1.5f64..5.0) {
            if let Ok(lhs_base) = ap_anchored(a, p) {
                let pp = p / (p - 1.0);
                let dual = a * (1.0 - pp);
                if let Ok(rhs) = ap_anchored(dual, pp) {
                    prop_assert!((rhs / lhs_base.powf(pp - 1.0) - 1.0).abs() < 1e-12);
                }
            }
        }
    }
}
