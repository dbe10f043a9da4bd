//! Closed-form evaluation of the sharpness examples built from power
//! functions on the nested intervals `I_n = [0, 2^{-n}]`.

use std::f64::consts::LN_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exponents::{
    critical_p, gamma, high_case_identity_residual, low_case_identity_residual, rh_index,
    serialize_exponent, star, IDENTITY_TOL,
};
use crate::weights::{
    ap_anchored, ap_characteristic, rh_anchored, rh_characteristic, ScanFamily, Weight,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SharpnessCase {
    /// `2 < p <= 𝔭`.
    Low,
    /// `𝔭 <= p < q0`.
    High,
}

impl SharpnessCase {
    pub fn parse(text: &str) -> Result<Self> {
        match text.trim().to_ascii_lowercase().as_str() {
            "low" | "case-low" | "caselow" => Ok(SharpnessCase::Low),
            "high" | "case-high" | "casehigh" => Ok(SharpnessCase::High),
            other => Err(Error::InvalidInput(format!(
                "unknown case {other:?} (use low or high)"
            ))),
        }
    }
}

/// Exponents `(p0, q0, p)` together with a case.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SharpnessSetup {
    pub case: SharpnessCase,
    pub p0: f64,
    #[serde(serialize_with = "serialize_exponent")]
    pub q0: f64,
    pub p: f64,
}

/// A power-law quantity `d0 + d1 ε` that must stay positive.
#[derive(Debug, Clone, Serialize)]
pub struct Condition {
    pub name: &'static str,
    pub d0: f64,
    pub d1: f64,
}

/// Exponents of `f_ε = x^{cf}`, `g_ε = x^{cg}`, `w_ε = x^{a}` on `[0, 1]`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Profile {
    pub eps: f64,
    pub cf: f64,
    pub cg: f64,
    pub a: f64,
    /// Exponent of `σ_ε = w_ε^{1 - p*}`.
    pub sigma: f64,
}

impl SharpnessSetup {
    pub fn new(case: SharpnessCase, p0: f64, q0: f64, p: f64) -> Result<Self> {
        let crit = critical_p(p0, q0)?;
        let ok = match case {
            SharpnessCase::Low => p > 2.0 && p <= crit,
            SharpnessCase::High => p >= crit && p < q0,
        };
        if !ok {
            let range = match case {
                SharpnessCase::Low => format!("(2, {crit}]"),
                SharpnessCase::High => format!("[{crit}, {q0})"),
            };
            return Err(Error::InvalidExponent(format!(
                "p = {p} is outside the {case:?} range {range} for p0 = {p0}, q0 = {q0}"
            )));
        }
        let residual = match case {
            SharpnessCase::Low => low_case_identity_residual(p0, p)?,
            SharpnessCase::High => high_case_identity_residual(q0, p)?,
        };
        if residual > IDENTITY_TOL {
            return Err(Error::Invariant(format!(
                "exponent identity residual {residual} at p = {p}"
            )));
        }
        Ok(Self { case, p0, q0, p })
    }

    fn q0_star(&self) -> f64 {
        star(self.q0).expect("q0 > 2 checked")
    }

    fn p_star(&self) -> f64 {
        star(self.p).expect("p > 2 checked")
    }

    /// The exponents at `eps` (no domain check).
    pub fn profile_unchecked(&self, eps: f64) -> Profile {
        let (p0, p) = (self.p0, self.p);
        let ps = self.p_star();
        let q0s = self.q0_star();
        match self.case {
            SharpnessCase::Low => {
                let p0s = star(p0).expect("p0 < 2");
                let a = p / p0 - 1.0 - eps;
                Profile {
                    eps,
                    cf: -1.0 / p0 + eps,
                    cg: -1.0 / p0s + eps,
                    a,
                    sigma: a * (1.0 - ps),
                }
            }
            SharpnessCase::High => {
                let inv_q0 = if self.q0.is_infinite() {
                    0.0
                } else {
                    1.0 / self.q0
                };
                let s = ps / q0s - 1.0 - eps;
                Profile {
                    eps,
                    cf: -inv_q0 + eps,
                    cg: -1.0 / q0s + eps,
                    a: s * (1.0 - p / 2.0),
                    sigma: s,
                }
            }
        }
    }

    /// The integrability conditions behind every closed form, as affine
    /// functions of ε.
    pub fn conditions(&self) -> Vec<Condition> {
        let at0 = self.profile_unchecked(0.0);
        let at1 = self.profile_unchecked(1.0);
        let q0s = self.q0_star();
        let ps = self.p_star();
        let r = self.p / self.p0;
        let r_dual = 1.0 - r / (r - 1.0);
        let s = rh_index(self.q0, self.p).expect("p < q0");
        type Expr = fn(&SharpnessSetup, &Profile, f64, f64, f64, f64) -> f64;
        let exprs: [(&'static str, Expr); 7] = [
            (
                "averages of |f|^p0 on I_n (p0·cf + 1 > 0)",
                |st, pr, _, _, _, _| st.p0 * pr.cf + 1.0,
            ),
            (
                "averages of |g|^q0* on I_n (q0*·cg + 1 > 0)",
                |_, pr, q0s, _, _, _| q0s * pr.cg + 1.0,
            ),
            (
                "local integrability of w (a + 1 > 0)",
                |_, pr, _, _, _, _| pr.a + 1.0,
            ),
            (
                "A_{p/p0} dual weight (1 - (p/p0)')·a + 1 > 0",
                |_, pr, _, _, rd, _| rd * pr.a + 1.0,
            ),
            (
                "RH_{(q0/p)'} power (a·(q0/p)' + 1 > 0)",
                |_, pr, _, _, _, s| pr.a * s + 1.0,
            ),
            (
                "norm of f in L^p(w) (p·cf + a + 1 > 0)",
                |st, pr, _, _, _, _| st.p * pr.cf + pr.a + 1.0,
            ),
            (
                "norm of g in L^{p*}(σ) (p*·cg + σ + 1 > 0)",
                |_, pr, _, ps, _, _| ps * pr.cg + pr.sigma + 1.0,
            ),
        ];
        exprs
            .iter()
            .map(|(name, e)| {
                let mut v0 = e(self, &at0, q0s, ps, r_dual, s);
                let v1 = e(self, &at1, q0s, ps, r_dual, s);
                if v0.abs() < 1e-12 {
                    v0 = 0.0;
                }
                Condition {
                    name,
                    d0: v0,
                    d1: v1 - v0,
                }
            })
            .collect()
    }

    /// Supremum of admissible ε (may be infinite).
    pub fn eps_max(&self) -> Result<f64> {
        let mut best = f64::INFINITY;
        for c in self.conditions() {
            if c.d1 < 0.0 {
                if c.d0 <= 0.0 {
                    return Err(Error::Divergent(format!(
                        "no admissible ε: {} fails at ε = 0",
                        c.name
                    )));
                }
                best = best.min(c.d0 / -c.d1);
            } else if c.d0 < 0.0 {
                return Err(Error::Divergent(format!(
                    "{} only holds for ε > {}",
                    c.name,
                    -c.d0 / c.d1
                )));
            }
        }
        Ok(best)
    }

    /// Exponents at `eps`, after checking every integrability condition.
    pub fn profile(&self, eps: f64) -> Result<Profile> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "ε must be positive, got {eps}"
            )));
        }
        for c in self.conditions() {
            let v = c.d0 + c.d1 * eps;
            if !(v > 0.0) {
                return Err(Error::Divergent(format!(
                    "{} fails at ε = {eps} (value {v})",
                    c.name
                )));
            }
        }
        Ok(self.profile_unchecked(eps))
    }

    /// `log` of the factors `F = (⨍_{I_n} f^{p0})^{1/p0} / |I_n|^{cf}` and
    /// `G = (⨍_{I_n} g^{q0*})^{1/q0*} / |I_n|^{cg}`, plus the per-level decay
    /// exponent `2cf + cg + 1` of the terms.
    fn term_parts(&self, pr: &Profile) -> (f64, f64, f64) {
        let q0s = self.q0_star();
        let log_f = -(self.p0 * pr.cf + 1.0).ln() / self.p0;
        let log_g = -(q0s * pr.cg + 1.0).ln() / q0s;
        (log_f, log_g, 2.0 * pr.cf + pr.cg + 1.0)
    }

    /// Term `n` of the sparse form, `(⨍_{I_n} f^{p0})^{2/p0} (⨍_{I_n} g^{q0*})^{1/q0*} |I_n|`.
    pub fn term(&self, eps: f64, n: u32) -> Result<f64> {
        let pr = self.profile(eps)?;
        let (lf, lg, decay) = self.term_parts(&pr);
        Ok((2.0 * lf + lg - n as f64 * LN_2 * decay).exp())
    }

    /// Default tail cutoff `N = ⌈10/ε⌉`.
    pub fn default_cutoff(eps: f64) -> u64 {
        (10.0 / eps).ceil() as u64
    }

    /// `Σ_{n=0}^{N} term(n)`, accumulated in log space.
    pub fn lhs_exact(&self, eps: f64, cutoff: u64) -> Result<f64> {
        let pr = self.profile(eps)?;
        let (lf, lg, decay) = self.term_parts(&pr);
        let scale = 2.0 * lf + lg;
        let step = LN_2 * decay;
        let mut sum = 0.0;
        for n in 0..=cutoff {
            sum += (scale - n as f64 * step).exp();
        }
        Ok(sum)
    }

    /// The full geometric series `Σ_{n>=0} term(n)`.
    pub fn lhs_series(&self, eps: f64) -> Result<f64> {
        let pr = self.profile(eps)?;
        let (lf, lg, decay) = self.term_parts(&pr);
        if !(decay > 0.0) {
            return Err(Error::Divergent(format!(
                "terms do not decay (exponent {decay})"
            )));
        }
        Ok((2.0 * lf + lg).exp() / -(-LN_2 * decay).exp_m1())
    }

    pub fn rhs_exact(&self, eps: f64, mode: &CharacteristicMode) -> Result<RhsReport> {
        let pr = self.profile(eps)?;
        let r = self.p / self.p0;
        let s = rh_index(self.q0, self.p)?;
        let (ap, rh) = match mode {
            CharacteristicMode::Anchored => (ap_anchored(pr.a, r)?, rh_anchored(pr.a, s)?),
            CharacteristicMode::Scan(scan) => {
                let w = Weight::power(pr.a)?;
                (
                    ap_characteristic(&w, r, scan)?.value,
                    rh_characteristic(&w, s, scan)?.value,
                )
            }
        };
        let g = gamma(self.p0, self.q0, self.p)?;
        let ps = self.p_star();
        let f_norm = (1.0 / (self.p * pr.cf + pr.a + 1.0)).powf(1.0 / self.p);
        let g_norm = (1.0 / (ps * pr.cg + pr.sigma + 1.0)).powf(1.0 / ps);
        let value = (ap * rh).powf(2.0 * g) * f_norm * f_norm * g_norm;
        Ok(RhsReport {
            ap,
            rh,
            gamma: g,
            f_norm,
            g_norm,
            value,
        })
    }

    /// `-(1 + 2/p0)` (low) or `-(1 + 1/q0*)` (high).
    pub fn target_slope(&self) -> f64 {
        match self.case {
            SharpnessCase::Low => -(1.0 + 2.0 / self.p0),
            SharpnessCase::High => -(1.0 + 1.0 / self.q0_star()),
        }
    }
}

/// How the weight characteristics on the right side are evaluated.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CharacteristicMode {
    /// Closed-form quotient on anchored intervals `[0, b]`.
    Anchored,
    /// Supremum over an interval scan.
    Scan(ScanFamily),
}

#[derive(Debug, Clone, Serialize)]
pub struct RhsReport {
    pub ap: f64,
    pub rh: f64,
    pub gamma: f64,
    pub f_norm: f64,
    pub g_norm: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

/// Least squares of `log y` against `log x`.
pub fn slope_fit(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "slope fit needs >= 2 paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.iter().chain(ys).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput(
            "slope fit needs positive finite data".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput(
            "slope fit needs distinct x values".into(),
        ));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(SlopeFit {
        slope,
        intercept,
        residual,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub setup: SharpnessSetup,
    pub eps_max: f64,
    pub target_slope: f64,
    pub rows: Vec<SweepRow>,
    pub lhs_fit: SlopeFit,
    pub rhs_fit: SlopeFit,
    /// `max/min - 1` of `lhs/rhs` over the three smallest ε.
    pub ratio_variation: f64,
}

/// Largest allowed gap between the two fitted slopes.
pub const SLOPE_AGREEMENT: f64 = 0.1;
/// Largest allowed relative spread of `lhs/rhs` over the three smallest ε.
pub const RATIO_SPREAD: f64 = 0.2;
/// Largest RMS log residual accepted from a fit.
pub const FIT_RESIDUAL: f64 = 0.1;

/// Evaluates both sides over `eps_list` (reported in decreasing ε) and fits
/// log-log slopes.
pub fn sweep(
    setup: &SharpnessSetup,
    eps_list: &[f64],
    mode: &CharacteristicMode,
) -> Result<SweepReport> {
    if eps_list.len() < 5 {
        return Err(Error::InvalidInput(format!(
            "a sweep needs at least 5 values of ε, got {}",
            eps_list.len()
        )));
    }
    let mut eps: Vec<f64> = eps_list.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    let eps_max = setup.eps_max()?;
    let rows: Vec<SweepRow> = eps
        .par_iter()
        .map(|&e| {
            let lhs = setup.lhs_exact(e, SharpnessSetup::default_cutoff(e))?;
            let rhs = setup.rhs_exact(e, mode)?.value;
            Ok(SweepRow {
                eps: e,
                lhs,
                rhs,
                ratio: lhs / rhs,
            })
        })
        .collect::<Result<_>>()?;
    let xs: Vec<f64> = rows.iter().map(|r| r.eps).collect();
    let lhs_fit = slope_fit(&xs, &rows.iter().map(|r| r.lhs).collect::<Vec<_>>())?;
    let rhs_fit = slope_fit(&xs, &rows.iter().map(|r| r.rhs).collect::<Vec<_>>())?;
    for (name, fit) in [("lhs", &lhs_fit), ("rhs", &rhs_fit)] {
        if fit.residual > FIT_RESIDUAL {
            return Err(Error::Invariant(format!(
                "{name} fit residual {} exceeds {FIT_RESIDUAL}",
                fit.residual
            )));
        }
    }
    if (lhs_fit.slope - rhs_fit.slope).abs() > SLOPE_AGREEMENT {
        return Err(Error::Invariant(format!(
            "slopes disagree: lhs {} vs rhs {}",
            lhs_fit.slope, rhs_fit.slope
        )));
    }
    let tail: Vec<f64> = rows.iter().rev().take(3).map(|r| r.ratio).collect();
    let hi = tail.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = tail.iter().cloned().fold(f64::INFINITY, f64::min);
    let ratio_variation = hi / lo - 1.0;
    if !(ratio_variation < RATIO_SPREAD) {
        return Err(Error::Invariant(format!(
            "lhs/rhs has not settled: relative spread {ratio_variation} over the last three ε"
        )));
    }
    Ok(SweepReport {
        setup: *setup,
        eps_max,
        target_slope: setup.target_slope(),
        rows,
        lhs_fit,
        rhs_fit,
        ratio_variation,
    })
}

/// `2^{-k}` for `k` in `k_min..=k_max`.
pub fn dyadic_eps(k_min: u32, k_max: u32) -> Vec<f64> {
    (k_min..=k_max).map(|k| (-(k as f64)).exp2()).collect()
}

/// `points` log-uniform values in `[eps_min, eps_max]`, decreasing.
pub fn log_eps(eps_min: f64, eps_max: f64, points: usize) -> Result<Vec<f64>> {
    if !(eps_min > 0.0 && eps_max > eps_min) || points < 2 {
        return Err(Error::InvalidInput(format!(
            "need 0 < eps_min < eps_max and >= 2 points, got [{eps_min}, {eps_max}] x {points}"
        )));
    }
    let span = eps_min / eps_max;
    Ok((0..points)
        .map(|i| eps_max * span.powf(i as f64 / (points - 1) as f64))
        .collect())
}
