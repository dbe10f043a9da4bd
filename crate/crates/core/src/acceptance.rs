//! The acceptance suite: eight end-to-end checks with fixed tolerances.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::corpus::{band_limited, bump, Corpus};
use crate::error::Result;
use crate::exponents::{
    check_critical_identity, conj, critical_p, high_case_identity_residual, identity_residual,
    low_case_identity_residual,
};
use crate::heatlp::{
    grand_maximal_s_star, hl_maximal, offdiag_audit, reproducing_check, SquareEngine,
    SquareFunctionKind, TimeGrid,
};
use crate::lattice::{DyadicInterval, Interval};
use crate::sharpness::{
    dyadic_eps, slope_fit, sweep, CharacteristicMode, SharpnessCase, SharpnessSetup,
};
use crate::sparse::{domination_check, SparseBuildConfig};
use crate::weights::{ap_anchored, ap_characteristic, ScanFamily, Weight};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl std::fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {}. {}: {} ({:.2}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds
        )
    }
}

fn timed(
    id: u32,
    name: &'static str,
    limit: Option<f64>,
    run: impl FnOnce() -> Result<(bool, String)>,
) -> CriterionResult {
    let start = Instant::now();
    let outcome = run();
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = limit {
        if seconds >= limit {
            passed = false;
            detail.push_str(&format!("; runtime {seconds:.2}s exceeds {limit}s"));
        }
    }
    CriterionResult {
        id,
        name,
        passed,
        detail,
        seconds,
    }
}

/// The twelve `(case, p0, q0, p)` choices of the sharpness sweep.
pub fn sharpness_setups() -> Vec<(SharpnessCase, f64, f64, f64)> {
    use SharpnessCase::*;
    let inf = f64::INFINITY;
    vec![
        (Low, 1.0, 4.0, 2.2),
        (Low, 1.0, 4.0, 2.5),
        (High, 1.0, 4.0, 3.0),
        (High, 1.0, 4.0, 3.5),
        (Low, 1.0, inf, 2.5),
        (Low, 1.0, inf, 3.0),
        (High, 1.0, inf, 4.0),
        (High, 1.0, inf, 6.0),
        (Low, 1.5, 6.0, 2.5),
        (Low, 1.5, 6.0, 3.0),
        (High, 1.5, 6.0, 4.0),
        (High, 1.5, 6.0, 5.0),
    ]
}

pub fn plancherel() -> CriterionResult {
    timed(1, "Plancherel ratio", Some(10.0), || {
        let n = 4096;
        let target = 0.5f64.sqrt();
        let mut worst = 0.0_f64;
        let mut warned = false;
        for kind in [SquareFunctionKind::Vertical, SquareFunctionKind::Gradient] {
            let engine = SquareEngine::new(n, kind, TimeGrid::default())?;
            for seed in 0..10 {
                let f = band_limited(1000 + seed, n, 32)?;
                let s = engine.full(&f)?;
                warned |= s.band_warning;
                worst = worst.max((s.values.l2_norm() / f.l2_norm() / target - 1.0).abs());
            }
        }
        Ok((
            worst <= 0.02 && !warned,
            format!("max |ratio/2^-1/2 - 1| = {worst:.2e} over 20 runs (tol 2e-2)"),
        ))
    })
}

pub fn reproducing() -> CriterionResult {
    timed(2, "Calderon reproducing formula", None, || {
        let mut worst = 0.0_f64;
        for alpha in [1.0, 2.0] {
            for seed in 0..3 {
                let f = band_limited(2000 + seed, 1024, 16)?;
                let r = reproducing_check(&f, alpha, &TimeGrid::default())?;
                if r.band_warning || r.degenerate {
                    return Ok((
                        false,
                        format!("alpha {alpha}: band or mean precondition violated"),
                    ));
                }
                worst = worst.max(r.relative_error);
            }
        }
        Ok((
            worst < 1e-3,
            format!("max relative error {worst:.2e} (tol 1e-3)"),
        ))
    })
}

pub fn sharpness_slopes() -> CriterionResult {
    timed(3, "Sharpness slopes", Some(5.0), || {
        let eps = dyadic_eps(6, 14);
        let mut worst = 0.0_f64;
        for (case, p0, q0, p) in sharpness_setups() {
            let st = SharpnessSetup::new(case, p0, q0, p)?;
            let r = sweep(&st, &eps, &CharacteristicMode::Anchored)?;
            worst = worst
                .max((r.lhs_fit.slope - r.target_slope).abs())
                .max((r.rhs_fit.slope - r.target_slope).abs());
        }
        Ok((
            worst <= 0.05,
            format!("max |slope - target| = {worst:.3e} over 12 sweeps x 2 sides (tol 5e-2)"),
        ))
    })
}

pub fn weight_asymptotics() -> CriterionResult {
    timed(4, "Weight asymptotics", None, || {
        let eps = dyadic_eps(6, 14);
        let mut worst_slope = 0.0_f64;
        let mut worst_scan = 0.0_f64;
        for (case, p0, _, p) in sharpness_setups() {
            if case != SharpnessCase::Low {
                continue;
            }
            let r = p / p0;
            let values: Vec<f64> = eps
                .iter()
                .map(|e| ap_anchored(r - 1.0 - e, r))
                .collect::<Result<_>>()?;
            let fit = slope_fit(&eps, &values)?;
            worst_slope = worst_slope.max((fit.slope + (r - 1.0)).abs());
            let e = eps[0];
            let anchored = values[0];
            let scanned =
                ap_characteristic(&Weight::power(r - 1.0 - e)?, r, &ScanFamily::default())?.value;
            worst_scan = worst_scan.max((scanned / anchored - 1.0).abs());
        }
        Ok((
            worst_slope <= 0.05 && worst_scan <= 0.1,
            format!(
                "max |slope + (p/p0 - 1)| = {worst_slope:.3e} (tol 5e-2); scan vs anchored at 2^-6: {worst_scan:.3e} (tol 1e-1)"
            ),
        ))
    })
}

/// Seeded `(p0, q0, p)` triples with `1 <= p0 < 2 < p < q0 <= inf`.
pub fn exponent_sample(count: usize) -> Vec<(f64, f64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    (0..count)
        .map(|_| {
            let p0 = rng.gen_range(1.0..1.9);
            let q0 = if rng.gen_bool(0.2) {
                f64::INFINITY
            } else {
                rng.gen_range(2.5..30.0)
            };
            let top = if q0.is_finite() { q0 } else { 20.0 };
            let p = rng.gen_range(2.05..top - 0.05);
            (p0, q0, p)
        })
        .collect()
}

pub fn exponent_identities() -> CriterionResult {
    timed(5, "Exponent identities", None, || {
        let mut worst = 0.0_f64;
        for (p0, q0, p) in exponent_sample(100) {
            let crit = critical_p(p0, q0)?;
            check_critical_identity(p0, q0, crit)?;
            let left = 1.0 / (crit - p0);
            let right = crate::exponents::rh_index(q0, crit)? / (2.0 * crate::exponents::star(q0)?);
            worst = worst.max(identity_residual(&[left, -right]));
            worst = worst.max(low_case_identity_residual(p0, p)?);
            worst = worst.max(high_case_identity_residual(q0, p)?);
            // duality of anchored A_r quotients for x^a, r = p/p0
            let r = p / p0;
            let rc = conj(r)?;
            let a = 0.5 * (r - 1.0) - 0.25;
            let lhs = ap_anchored(a * (1.0 - rc), rc)?;
            let rhs = ap_anchored(a, r)?.powf(rc - 1.0);
            worst = worst.max(identity_residual(&[lhs, -rhs]));
        }
        Ok((
            worst <= 1e-12,
            format!("max relative residual {worst:.2e} over 100 triples (tol 1e-12)"),
        ))
    })
}

pub fn sparse_soundness() -> CriterionResult {
    timed(6, "Sparse construction soundness", None, || {
        let n = 1024;
        let cfg = SparseBuildConfig::new(1.0, 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut ratios = Vec::new();
        let mut sparse_ok = 0;
        for i in 0..20 {
            let k_max = [4, 8, 16, 32][i % 4];
            let f = band_limited(rng.gen(), n, k_max)?;
            let g = bump(n, rng.gen(), rng.gen_range(0.05..0.2))?;
            let r = domination_check(&f, &g, &DyadicInterval::ROOT, &cfg)?;
            if r.sparsity.ok {
                sparse_ok += 1;
            }
            ratios.push(r.ratio);
        }
        let finite = ratios.iter().all(|r| r.is_finite() && *r > 0.0);
        let mut sorted = ratios.clone();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let median = 0.5 * (sorted[9] + sorted[10]);
        let spread = sorted[19] / median;
        Ok((
            sparse_ok == 20 && finite && spread < 50.0,
            format!(
                "sparsity ok {sparse_ok}/20; ratio min {:.3e} median {median:.3e} max {:.3e}; max/median {spread:.2} (tol 50)",
                sorted[0], sorted[19]
            ),
        ))
    })
}

pub fn offdiagonal() -> CriterionResult {
    timed(7, "Off-diagonal audit", None, || {
        let mut worst = 0.0_f64;
        for t in [1e-4, 1e-3] {
            let s = f64::sqrt(t);
            for sep in [4.0, 8.0, 16.0] {
                let c1 = 0.25;
                let c2 = c1 + 2.0 * s + sep * s;
                let i1 = Interval::new(c1 - s, c1 + s);
                let i2 = Interval::new(c2 - s, c2 + s);
                let r = offdiag_audit(t, &i1, &i2, 1.0, f64::INFINITY)?;
                worst = worst.max(r.ratio);
            }
        }
        Ok((
            worst <= 1.0,
            format!("max empirical/bound = {worst:.3e} over 6 cases (tol 1)"),
        ))
    })
}

pub fn weak_type() -> CriterionResult {
    timed(8, "Maximal-function weak type", None, || {
        let n = 1024;
        let p0 = 1.0;
        let q0 = 4.0;
        let engine = SquareEngine::new(n, SquareFunctionKind::Vertical, TimeGrid::default())?;
        let mut hl = Vec::new();
        let mut grand = Vec::new();
        for seed in 0..4 {
            for f in Corpus::new(80 + seed, n).functions() {
                let m = hl_maximal(&f, 1.0)?;
                hl.push(crate::heatlp::weak_type_constant(&m, f.lp_norm(1.0), 1.0)?);
                let s = grand_maximal_s_star(&engine, &f, &DyadicInterval::ROOT, q0)?;
                grand.push(crate::heatlp::weak_type_constant(&s, f.lp_norm(p0), p0)?);
            }
        }
        let summary = |v: &[f64]| {
            let mut s = v.to_vec();
            s.sort_by(|a, b| a.total_cmp(b));
            (s[0], s[s.len() / 2], s[s.len() - 1])
        };
        let (hmin, hmed, hmax) = summary(&hl);
        let (gmin, gmed, gmax) = summary(&grand);
        Ok((
            hmax <= 10.0 && gmax <= 100.0,
            format!(
                "weak(1,1) of M over {} inputs: min {hmin:.3} median {hmed:.3} max {hmax:.3} (ceiling 10); weak(p0,p0) of S*: min {gmin:.3} median {gmed:.3} max {gmax:.3} (ceiling 100)",
                hl.len()
            ),
        ))
    })
}

/// Runs every criterion in order.
pub fn run_all() -> Vec<CriterionResult> {
    vec![
        plancherel(),
        reproducing(),
        sharpness_slopes(),
        weight_asymptotics(),
        exponent_identities(),
        sparse_soundness(),
        offdiagonal(),
        weak_type(),
    ]
}
