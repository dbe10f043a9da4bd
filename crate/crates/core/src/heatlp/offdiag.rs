use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::Interval;

/// Exponential rate `c` in the audited bound `e^{-c d^2 / t}`.
pub const OFFDIAG_C: f64 = 0.125;

/// Periodic images kept in the kernel sum.
pub const KERNEL_IMAGES: i32 = 3;

/// Sample points per interval in the kernel sup.
const SAMPLES: usize = 257;

/// Heat kernel of the torus, `Σ_{|m| <= 3} (4πt)^{-1/2} e^{-(z + m)^2 / 4t}`.
pub fn heat_kernel(t: f64, z: f64) -> f64 {
    let norm = (4.0 * PI * t).sqrt();
    (-KERNEL_IMAGES..=KERNEL_IMAGES)
        .map(|m| {
            let d = z + m as f64;
            (-d * d / (4.0 * t)).exp()
        })
        .sum::<f64>()
        / norm
}

/// Gap between two intervals on the torus (zero when they meet).
pub fn periodic_distance(a: &Interval, b: &Interval) -> f64 {
    (-2..=2)
        .map(|m| {
            let shift = m as f64;
            let gap_right = (b.lo + shift) - a.hi;
            let gap_left = a.lo - (b.hi + shift);
            gap_right.max(gap_left).max(0.0)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, Serialize)]
pub struct OffDiagReport {
    pub t: f64,
    pub distance: f64,
    /// `sup_{x ∈ I2, y ∈ I1} k_t(x, y)` times `|I1|^{1 - 1/p0} |I2|^{1/q0}`.
    pub empirical: f64,
    /// `|I1|^{-1/p0} |I2|^{1/q0} e^{-d^2 / 8t}`.
    pub bound: f64,
    pub ratio: f64,
}

/// Audits the `L^{p0} → L^{q0}` off-diagonal bound for `e^{tΔ}` between two
/// intervals of length `2 sqrt(t)`.
///
/// The empirical side bounds `||1_{I2} e^{tΔ} 1_{I1}||_{p0 → q0}` by the
/// kernel sup and Hölder; it is the exact norm when `p0 = 1`, `q0 = inf`.
pub fn offdiag_audit(
    t: f64,
    i1: &Interval,
    i2: &Interval,
    p0: f64,
    q0: f64,
) -> Result<OffDiagReport> {
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("t must be positive, got {t}")));
    }
    if !(p0 >= 1.0 && p0.is_finite()) || !(q0 > p0) {
        return Err(Error::InvalidExponent(format!(
            "need 1 <= p0 < q0 <= inf, got {p0}, {q0}"
        )));
    }
    let r = 2.0 * t.sqrt();
    for iv in [i1, i2] {
        if ((iv.len() - r) / r).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "interval [{}, {}] must have length 2 sqrt(t) = {r}",
                iv.lo, iv.hi
            )));
        }
    }
    let distance = periodic_distance(i1, i2);
    let points = |iv: &Interval| -> Vec<f64> {
        (0..SAMPLES)
            .map(|k| iv.lo + iv.len() * k as f64 / (SAMPLES - 1) as f64)
            .collect()
    };
    let xs = points(i2);
    let ys = points(i1);
    let mut sup = 0.0_f64;
    for &x in &xs {
        for &y in &ys {
            sup = sup.max(heat_kernel(t, (x - y).rem_euclid(1.0)));
        }
    }
    let inv_q0 = if q0.is_infinite() { 0.0 } else { 1.0 / q0 };
    let l1 = i1.len();
    let l2 = i2.len();
    let empirical = sup * l1.powf(1.0 - 1.0 / p0) * l2.powf(inv_q0);
    let bound = l1.powf(-1.0 / p0) * l2.powf(inv_q0) * (-OFFDIAG_C * distance * distance / t).exp();
    Ok(OffDiagReport {
        t,
        distance,
        empirical,
        bound,
        ratio: empirical / bound,
    })
}
