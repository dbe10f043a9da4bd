//! Exponent arithmetic: Hölder conjugates, the star map `s -> (s/2)'`, the
//! weighted exponent `gamma`, the class index `phi`, the critical index and
//! the restricted-range extrapolation exponent `beta`.
//!
//! Exponents are plain `f64` values; `f64::INFINITY` is a first-class value
//! with total rules (`conj(inf) = 1`, `star(inf) = 1`, `(inf/p)' = 1`).

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance used when an identity is checked after rescaling by the
/// magnitude of its largest term.
pub const IDENTITY_TOL: f64 = 1e-12;

pub fn serialize_exponent<S: Serializer>(
    value: &f64,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    if value.is_infinite() && *value > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*value)
    }
}

pub fn serialize_opt_exponent<S: Serializer>(
    value: &Option<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match value {
        Some(v) => serialize_exponent(v, s),
        None => s.serialize_none(),
    }
}

/// Parses an exponent literal; `inf`, `infinity` and `∞` map to `f64::INFINITY`.
pub fn parse_exponent(text: &str) -> Result<f64> {
    let t = text.trim();
    match t.to_ascii_lowercase().as_str() {
        "inf" | "infinity" | "+inf" | "∞" => Ok(f64::INFINITY),
        _ => t
            .parse::<f64>()
            .map_err(|_| Error::InvalidExponent(format!("cannot parse exponent `{t}`"))),
    }
}

/// Hölder conjugate `s/(s-1)`, with `conj(1) = inf` and `conj(inf) = 1`.
pub fn conj(s: f64) -> Result<f64> {
    if s.is_nan() || s < 1.0 {
        return Err(Error::InvalidExponent(format!(
            "Hölder conjugate needs s >= 1, got {s}"
        )));
    }
    if s.is_infinite() {
        Ok(1.0)
    } else if s == 1.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(s / (s - 1.0))
    }
}

/// The star map `s/(s-2)`, the conjugate of `s/2`.
///
/// Defined for every `s != 2`; for `s < 2` the value is negative. Negative
/// values are only meaningful as formal exponents inside convergent power
/// integrals, so callers check their own integrability conditions.
pub fn star(s: f64) -> Result<f64> {
    if s.is_nan() || s == 2.0 {
        return Err(Error::InvalidExponent(format!(
            "star map undefined at s = {s}"
        )));
    }
    if s.is_infinite() {
        Ok(1.0)
    } else {
        Ok(s / (s - 2.0))
    }
}

/// `q0 / p`, infinite when `q0` is.
pub fn ratio(q0: f64, p: f64) -> f64 {
    if q0.is_infinite() {
        f64::INFINITY
    } else {
        q0 / p
    }
}

/// Reverse Hölder index `(q0/p)'`.
pub fn rh_index(q0: f64, p: f64) -> Result<f64> {
    if q0.is_finite() && p > 0.0 && q0 > p {
        Ok(q0 / (q0 - p))
    } else {
        conj(ratio(q0, p))
    }
}

fn check_pair(p0: f64, q0: f64) -> Result<()> {
    if !(1.0..2.0).contains(&p0) {
        return Err(Error::InvalidExponent(format!(
            "p0 must lie in [1, 2), got {p0}"
        )));
    }
    if q0.is_nan() || q0 <= 2.0 {
        return Err(Error::InvalidExponent(format!(
            "q0 must lie in (2, inf], got {q0}"
        )));
    }
    Ok(())
}

fn check_triple(p0: f64, q0: f64, p: f64) -> Result<()> {
    check_pair(p0, q0)?;
    if !(p > p0 && p < q0) {
        return Err(Error::InvalidExponent(format!(
            "p must lie in (p0, q0) = ({p0}, {q0}), got {p}"
        )));
    }
    Ok(())
}

/// Relative residual of an identity given its terms: `|sum| / max(1, max |term|)`.
pub fn identity_residual(terms: &[f64]) -> f64 {
    let scale = terms.iter().fold(1.0_f64, |m, t| m.max(t.abs()));
    terms.iter().sum::<f64>().abs() / scale
}

/// The critical index `2 + p0/q0*`.
///
/// The defining identity `1/(crit - p0) = (q0/crit)'/(2 q0*)` is checked on
/// the way out; a mismatch is reported as an internal invariant failure.
pub fn critical_p(p0: f64, q0: f64) -> Result<f64> {
    check_pair(p0, q0)?;
    let crit = 2.0 + p0 / star(q0)?;
    check_critical_identity(p0, q0, crit)?;
    Ok(crit)
}

/// Checks that `candidate` satisfies the critical identity for `(p0, q0)`.
pub fn check_critical_identity(p0: f64, q0: f64, candidate: f64) -> Result<()> {
    let q0s = star(q0)?;
    if !(candidate > p0 && candidate < q0) {
        return Err(Error::Invariant(format!(
            "critical index {candidate} outside (p0, q0) = ({p0}, {q0})"
        )));
    }
    let left = 1.0 / (candidate - p0);
    let right = rh_index(q0, candidate)? / (2.0 * q0s);
    let residual = identity_residual(&[left, -right]);
    // rounding in `candidate` is amplified by the gaps to p0 and q0
    let gap = if q0.is_finite() {
        (q0 - candidate).min(candidate - p0)
    } else {
        candidate - p0
    };
    let condition = (candidate / gap).max(1.0);
    if residual > IDENTITY_TOL * condition {
        return Err(Error::Invariant(format!(
            "critical identity fails at {candidate}: 1/(p-p0) = {left}, (q0/p)'/(2q0*) = {right}"
        )));
    }
    Ok(())
}

/// The two branches of `gamma`: `(1/(p - p0), (q0/p)'/(2 q0*))`.
pub fn gamma_branches(p0: f64, q0: f64, p: f64) -> Result<(f64, f64)> {
    check_triple(p0, q0, p)?;
    Ok((1.0 / (p - p0), rh_index(q0, p)? / (2.0 * star(q0)?)))
}

/// `gamma(p) = max(1/(p - p0), (q0/p)'/(2 q0*))`.
pub fn gamma(p0: f64, q0: f64, p: f64) -> Result<f64> {
    let (low, high) = gamma_branches(p0, q0, p)?;
    Ok(low.max(high))
}

/// `phi(p) = (q0/p)' (p/p0 - 1) + 1`.
pub fn phi(p0: f64, q0: f64, p: f64) -> Result<f64> {
    check_triple(p0, q0, p)?;
    Ok(rh_index(q0, p)? * (p / p0 - 1.0) + 1.0)
}

/// `omega(p) = (q0 - p)/(p - p0)`; infinite when `q0` is.
pub fn omega(p0: f64, q0: f64, p: f64) -> Result<f64> {
    check_triple(p0, q0, p)?;
    Ok(if q0.is_infinite() {
        f64::INFINITY
    } else {
        (q0 - p) / (p - p0)
    })
}

/// Restricted-range extrapolation exponent
/// `beta(p, q) = max(1, (q0 - p)(q - p0) / ((q0 - q)(p - p0)))`.
///
/// With `q0 = inf` the ratio `(q0 - p)/(q0 - q)` is taken as its limit 1.
pub fn beta(p: f64, q: f64, p0: f64, q0: f64) -> Result<f64> {
    check_pair(p0, q0)?;
    if q == q0 {
        return Err(Error::InvalidExponent("beta undefined at q = q0".into()));
    }
    for (name, v) in [("p", p), ("q", q)] {
        if !(v > p0 && v < q0) {
            return Err(Error::InvalidExponent(format!(
                "{name} must lie in (p0, q0) = ({p0}, {q0}), got {v}"
            )));
        }
    }
    let far = if q0.is_infinite() {
        1.0
    } else {
        (q0 - p) / (q0 - q)
    };
    Ok((far * (q - p0) / (p - p0)).max(1.0))
}

/// Residual of `-p*/p0* + p/p0 - p p*/p0 + p*` (vanishes identically).
pub fn low_case_identity_residual(p0: f64, p: f64) -> Result<f64> {
    let ps = star(p)?;
    let p0s = star(p0)?;
    Ok(identity_residual(&[-ps / p0s, p / p0, -p * ps / p0, ps]))
}

/// Residual of `-p/q0 + p*/q0* - p p*/(2 q0*) + p/2` (vanishes identically).
pub fn high_case_identity_residual(q0: f64, p: f64) -> Result<f64> {
    let ps = star(p)?;
    let q0s = star(q0)?;
    let p_over_q0 = if q0.is_infinite() { 0.0 } else { p / q0 };
    Ok(identity_residual(&[
        -p_over_q0,
        ps / q0s,
        -p * ps / (2.0 * q0s),
        p / 2.0,
    ]))
}

/// Every derived quantity of a `(p0, q0, p)` triple.
#[derive(Debug, Clone, Serialize)]
pub struct ExponentProfile {
    pub p0: f64,
    #[serde(serialize_with = "serialize_exponent")]
    pub q0: f64,
    pub p: f64,
    #[serde(serialize_with = "serialize_exponent")]
    pub p_conj: f64,
    pub q0_star: f64,
    /// `(p/2)'`; absent at `p = 2`, negative for `p < 2`.
    pub p_star: Option<f64>,
    #[serde(serialize_with = "serialize_exponent")]
    pub rh_index: f64,
    pub gamma: f64,
    pub gamma_low_branch: f64,
    pub gamma_high_branch: f64,
    pub phi: f64,
    pub critical: f64,
    #[serde(serialize_with = "serialize_exponent")]
    pub omega: f64,
    #[serde(serialize_with = "serialize_opt_exponent")]
    pub q: Option<f64>,
    pub beta: Option<f64>,
}

impl ExponentProfile {
    pub fn new(p0: f64, q0: f64, p: f64) -> Result<Self> {
        check_triple(p0, q0, p)?;
        let (low, high) = gamma_branches(p0, q0, p)?;
        Ok(Self {
            p0,
            q0,
            p,
            p_conj: conj(p)?,
            q0_star: star(q0)?,
            p_star: star(p).ok(),
            rh_index: rh_index(q0, p)?,
            gamma: low.max(high),
            gamma_low_branch: low,
            gamma_high_branch: high,
            phi: phi(p0, q0, p)?,
            critical: critical_p(p0, q0)?,
            omega: omega(p0, q0, p)?,
            q: None,
            beta: None,
        })
    }

    /// Attaches `beta(p, q)` for an extrapolation source index `q`.
    pub fn with_source(mut self, q: f64) -> Result<Self> {
        self.beta = Some(beta(self.p, q, self.p0, self.q0)?);
        self.q = Some(q);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const INF: f64 = f64::INFINITY;

    #[test]
    fn conj_values() {
        assert_eq!(conj(2.0).unwrap(), 2.0);
        assert_relative_eq!(conj(4.0).unwrap(), 4.0 / 3.0);
        assert_eq!(conj(INF).unwrap(), 1.0);
        assert_eq!(conj(1.0).unwrap(), INF);
        assert!(conj(0.5).is_err());
    }

    #[test]
    fn star_values() {
        assert_eq!(star(4.0).unwrap(), 2.0);
        assert_eq!(star(INF).unwrap(), 1.0);
        assert_eq!(star(1.0).unwrap(), -1.0);
        assert!(star(2.0).is_err());
    }

    #[test]
    fn gamma_examples() {
        assert_relative_eq!(gamma(1.0, INF, 2.5).unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(gamma(1.0, INF, 4.0).unwrap(), 0.5, epsilon = 1e-15);
        let (low, high) = gamma_branches(1.0, 4.0, 2.5).unwrap();
        assert_relative_eq!(low, 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(high, 2.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn laplacian_gamma_matches_max_formula() {
        for p in [1.5_f64, 2.0, 2.5, 3.0, 4.0, 7.0] {
            let expected = (1.0 / (p - 1.0)).max(0.5);
            assert_relative_eq!(gamma(1.0, INF, p).unwrap(), expected, epsilon = 1e-15);
        }
    }

    #[test]
    fn critical_examples() {
        assert_relative_eq!(critical_p(1.0, INF).unwrap(), 3.0);
        assert_relative_eq!(critical_p(1.0, 4.0).unwrap(), 2.5);
        let mut last = f64::INFINITY;
        for delta in [0.5, 0.1, 0.01, 0.001] {
            let c = critical_p(2.0 - delta, 2.0 + delta).unwrap();
            assert!(c > 2.0 && c < last);
            last = c;
        }
        assert!(last - 2.0 < 0.01);
    }

    #[test]
    fn wrong_critical_value_is_an_invariant_failure() {
        let err = check_critical_identity(1.0, 4.0, 2.6).unwrap_err();
        assert!(err.is_invariant());
    }

    #[test]
    fn phi_examples() {
        assert_relative_eq!(phi(1.0, INF, 2.0).unwrap(), 2.0);
        assert_relative_eq!(phi(1.0, 4.0, 3.0).unwrap(), 9.0, epsilon = 1e-12);
        let near = phi(1.0, 4.0, 1.0 + 1e-9).unwrap();
        assert!(near > 1.0 && near < 1.0 + 1e-8);
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta(3.0, 3.0, 1.0, 4.0).unwrap(), 1.0);
        assert_relative_eq!(beta(2.0, 2.5, 1.0, 4.0).unwrap(), 2.0, epsilon = 1e-12);
        for p in [2.5, 2.8, 3.5, 3.9] {
            assert_eq!(beta(p, 2.5, 1.0, 4.0).unwrap(), 1.0);
        }
        assert!(beta(2.0, 4.0, 1.0, 4.0).is_err());
    }

    #[test]
    fn omega_identity_at_critical() {
        for (p0, q0) in [(1.0, 4.0), (1.5, 6.0), (1.2, 3.0)] {
            let crit = critical_p(p0, q0).unwrap();
            let lhs = omega(p0, q0, crit).unwrap() * 2.0 * star(q0).unwrap();
            assert_relative_eq!(lhs, q0, max_relative = 1e-12);
        }
    }

    #[test]
    fn profile_serializes_infinity_as_literal() {
        let prof = ExponentProfile::new(1.0, INF, 4.0).unwrap();
        let json = serde_json::to_value(&prof).unwrap();
        assert_eq!(json["q0"], "inf");
        assert_eq!(json["gamma"], 0.5);
        assert_eq!(json["critical"], 3.0);
    }

    #[test]
    fn parse_literals() {
        assert_eq!(parse_exponent("inf").unwrap(), INF);
        assert_eq!(parse_exponent(" 2.5 ").unwrap(), 2.5);
        assert!(parse_exponent("abc").is_err());
    }

    proptest! {
        #[test]
        fn conj_is_an_involution(s in 1.0001f64..1e6) {
            let back = conj(conj(s).unwrap()).unwrap();
            prop_assert!((back - s).abs() <= 1e-9 * s);
        }

        #[test]
        fn star_is_conjugate_of_half(s in 2.0001f64..1e6) {
            let t = star(s).unwrap();
            prop_assert!((1.0 / t + 2.0 / s - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn gamma_is_piecewise(p0 in 1.0f64..1.99, q0 in 2.01f64..50.0, t in 0.001f64..0.999) {
            let p = p0 + t * (q0 - p0);
            let crit = critical_p(p0, q0).unwrap();
            let g = gamma(p0, q0, p).unwrap();
            let (low, high) = gamma_branches(p0, q0, p).unwrap();
            let branch = if p <= crit { low } else { high };
            prop_assert!((g - branch).abs() <= 1e-12 * g.max(1.0));
        }

        #[test]
        fn sharpness_identities_vanish(p0 in 1.0f64..1.99, q0 in 2.01f64..50.0, t in 0.001f64..0.999) {
            let p = 2.0 + t * (q0 - 2.0);
            prop_assert!(low_case_identity_residual(p0, p).unwrap() <= IDENTITY_TOL);
            prop_assert!(high_case_identity_residual(q0, p).unwrap() <= IDENTITY_TOL);
        }
    }
}
