//! Special functions for p-values and confidence intervals, implemented
//! in-repo: log-gamma, regularized incomplete beta, the F-distribution
//! survival function, and the Student-t quantile.
//!
//! Accuracy contracts (verified against a 50-digit reference):
//! - `ln_gamma`: ~1e-13 relative away from the zeros of ln Γ (x = 1, 2).
//! - `reg_inc_beta`: ≤ 1e-10 absolute.
//! - `f_sf`: ≤ 1e-9 absolute.
//! - `t_quantile`: ≤ 1e-8.

use crate::error::{Error, Result};
use serde::{Deserialize, Deserializer, Serialize};

/// A probability value, guaranteed in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Domain(format!(
                "probability must be in [0, 1], got {value}"
            )));
        }
        Ok(Self(value))
    }

    /// Wraps a computed value, absorbing float round-off just outside [0, 1].
    fn clamped(value: f64) -> Self {
        Self(value.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl<'de> Deserialize<'de> for Probability {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        Probability::new(v).map_err(serde::de::Error::custom)
    }
}

// Lanczos approximation, g = 607/128, 15 terms.
const LANCZOS_G: f64 = 607.0 / 128.0;
const LANCZOS_COEF: [f64; 15] = [
    0.999_999_999_999_997_1,
    57.156_235_665_862_92,
    -59.597_960_355_475_49,
    14.136_097_974_741_746,
    -0.491_913_816_097_620_2,
    3.399_464_998_481_189e-5,
    4.652_362_892_704_858e-5,
    -9.837_447_530_487_956e-5,
    1.580_887_032_249_125e-4,
    -2.102_644_417_241_049e-4,
    2.174_396_181_152_126e-4,
    -1.643_181_065_367_639e-4,
    8.441_822_398_385_275e-5,
    -2.619_083_840_158_141e-5,
    3.689_918_265_953_162e-6,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("ln_gamma requires x > 0, got {x}")));
    }
    Ok(ln_gamma_unchecked(x))
}

fn ln_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: ln Γ(x) = ln(π / sin(πx)) − ln Γ(1 − x), valid on (0, 0.5).
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln()
            - ln_gamma_unchecked(1.0 - x);
    }
    let z = x - 1.0;
    let mut series = LANCZOS_COEF[0];
    for (k, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        series += c / (z + k as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + series.ln() + (z + 0.5) * t.ln() - t
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(a + b)
}

const CF_MAX_ITER: usize = 300;
const CF_THRESHOLD: f64 = 1e-14;
const CF_TINY: f64 = 1e-30;

/// Regularized incomplete beta function I_x(a, b).
pub fn reg_inc_beta(x: f64, a: f64, b: f64) -> Result<Probability> {
    if !a.is_finite() || a <= 0.0 || !b.is_finite() || b <= 0.0 {
        return Err(Error::Domain(format!(
            "reg_inc_beta requires a > 0 and b > 0, got a = {a}, b = {b}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain(format!(
            "reg_inc_beta requires x in [0, 1], got {x}"
        )));
    }
    if x == 0.0 {
        return Ok(Probability(0.0));
    }
    if x == 1.0 {
        return Ok(Probability(1.0));
    }
    // Symmetry switch for continued-fraction convergence.
    let value = if x > (a + 1.0) / (a + b + 2.0) {
        1.0 - beta_cf(1.0 - x, b, a)?
    } else {
        beta_cf(x, a, b)?
    };
    Ok(Probability::clamped(value))
}

/// I_x(a, b) via the continued fraction (modified Lentz), valid when
/// x ≤ (a + 1)/(a + b + 2).
fn beta_cf(x: f64, a: f64, b: f64) -> Result<f64> {
    let ln_prefix = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    let prefix = ln_prefix.exp() / a;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;

    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < CF_TINY {
        d = CF_TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=CF_MAX_ITER {
        let m_f = m as f64;
        let m2 = 2.0 * m_f;

        // Even step.
        let numer = m_f * (b - m_f) * x / ((qam + m2) * (a + m2));
        d = 1.0 + numer * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + numer / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        // Odd step.
        let numer = -(a + m_f) * (qab + m_f) * x / ((a + m2) * (qap + m2));
        d = 1.0 + numer * d;
        if d.abs() < CF_TINY {
            d = CF_TINY;
        }
        c = 1.0 + numer / c;
        if c.abs() < CF_TINY {
            c = CF_TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;

        if (delta - 1.0).abs() < CF_THRESHOLD {
            return Ok(prefix * h);
        }
    }
    Err(Error::Precision(format!(
        "incomplete beta continued fraction did not converge in {CF_MAX_ITER} iterations (x = {x}, a = {a}, b = {b})"
    )))
}

/// Survival function of the F distribution: P(F_{d1,d2} > f).
pub fn f_sf(f: f64, d1: usize, d2: usize) -> Result<Probability> {
    if d1 == 0 || d2 == 0 {
        return Err(Error::Domain(format!(
            "f_sf requires positive degrees of freedom, got d1 = {d1}, d2 = {d2}"
        )));
    }
    if f.is_nan() || f < 0.0 {
        return Err(Error::Domain(format!("f_sf requires f >= 0, got {f}")));
    }
    if f == 0.0 {
        return Ok(Probability(1.0));
    }
    let (d1f, d2f) = (d1 as f64, d2 as f64);
    // P(F > f) = I_{d2/(d2 + d1 f)}(d2/2, d1/2); f = +inf maps to x = 0.
    let x = d2f / (d2f + d1f * f);
    reg_inc_beta(x, d2f / 2.0, d1f / 2.0)
}

/// CDF of Student's t with `df` degrees of freedom.
pub fn t_cdf(x: f64, df: usize) -> Result<Probability> {
    if df == 0 {
        return Err(Error::Domain("t_cdf requires df >= 1".into()));
    }
    if x.is_nan() {
        return Err(Error::Domain("t_cdf requires a finite t value".into()));
    }
    let dff = df as f64;
    let tail = reg_inc_beta(dff / (dff + x * x), dff / 2.0, 0.5)?.value();
    let p = if x >= 0.0 { 1.0 - tail / 2.0 } else { tail / 2.0 };
    Ok(Probability::clamped(p))
}

/// Quantile of Student's t: the q with P(T_df ≤ q) = p, for p in (0, 1).
///
/// Monotone bracketing plus bisection on [`t_cdf`].
pub fn t_quantile(p: f64, df: usize) -> Result<f64> {
    if df == 0 {
        return Err(Error::Domain("t_quantile requires df >= 1".into()));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!(
            "t_quantile requires p in (0, 1), got {p}"
        )));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p < 0.5 {
        return Ok(-t_quantile(1.0 - p, df)?);
    }

    // Expand the upper bracket until it covers p.
    let mut hi = 1.0;
    let mut expansions = 0;
    while t_cdf(hi, df)?.value() < p {
        hi *= 2.0;
        expansions += 1;
        if expansions > 2000 {
            return Err(Error::Precision(format!(
                "t_quantile bracket expansion failed for p = {p}, df = {df}"
            )));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if t_cdf(mid, df)?.value() < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Reference values computed with 50-digit arithmetic (mpmath).

    #[test]
    fn ln_gamma_reference_grid() {
        let cases: [(f64, f64); 9] = [
            (0.001, 6.907178885383853682512),
            (0.1, 2.25271265173420595987),
            (0.5, 0.5723649429247000870717),
            (1.5, -0.1207822376352452223455),
            (5.0, 3.178053830347945619647),
            (10.5, 13.94062521940376363316),
            (100.0, 359.134205369575398776),
            (1000.0, 5905.220423209181211826),
            (1e6, 12815504.56914761165998),
        ];
        for (x, expected) in cases {
            let got = ln_gamma(x).unwrap();
            let tol = 1e-12 * expected.abs().max(1.0);
            assert!(
                (got - expected).abs() <= tol,
                "ln_gamma({x}) = {got}, want {expected}"
            );
        }
        // Zeros of ln gamma: absolute accuracy there.
        assert_abs_diff_eq!(ln_gamma(1.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(2.0).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(ln_gamma(5.0).unwrap(), 24.0_f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(
            ln_gamma(0.5).unwrap(),
            std::f64::consts::PI.sqrt().ln(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn ln_gamma_rejects_nonpositive() {
        assert!(ln_gamma(0.0).is_err());
        assert!(ln_gamma(-3.0).is_err());
        assert!(ln_gamma(f64::NAN).is_err());
    }

    #[test]
    fn reg_inc_beta_uniform_and_symmetry() {
        for x in [0.0, 0.25, 1.0] {
            assert_abs_diff_eq!(reg_inc_beta(x, 1.0, 1.0).unwrap().value(), x, epsilon = 1e-12);
        }
        for a in [0.5, 3.0, 10.0] {
            assert_abs_diff_eq!(
                reg_inc_beta(0.5, a, a).unwrap().value(),
                0.5,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn reg_inc_beta_reference_values() {
        // I_x(2,2) = x^2 (3 - 2x).
        assert_abs_diff_eq!(
            reg_inc_beta(0.4, 2.0, 2.0).unwrap().value(),
            0.352,
            epsilon = 1e-10
        );
        let cases = [
            (0.3, 2.5, 3.5, 0.296752989295666399),
            (0.7, 0.5, 0.5, 0.630989880434454617),
            (0.01, 5.0, 1.0, 1.0e-10),
            (0.9, 10.0, 3.0, 0.889130022255),
        ];
        for (x, a, b, expected) in cases {
            assert_abs_diff_eq!(
                reg_inc_beta(x, a, b).unwrap().value(),
                expected,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn reg_inc_beta_rejects_out_of_domain() {
        assert!(reg_inc_beta(-0.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(1.1, 1.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 0.0, 1.0).is_err());
        assert!(reg_inc_beta(0.5, 1.0, -2.0).is_err());
    }

    #[test]
    fn f_sf_reference_values() {
        // pf(2.5, 1, 2, lower.tail = FALSE)
        assert_abs_diff_eq!(
            f_sf(2.5, 1, 2).unwrap().value(),
            0.25464400750007,
            epsilon = 1e-9
        );
        assert_abs_diff_eq!(
            f_sf(9.4, 1, 432).unwrap().value(),
            0.00230602721795773,
            epsilon = 1e-9
        );
        // Closed form: P(F_{2,d2} > f) = (1 + 2f/d2)^{-d2/2}.
        assert_abs_diff_eq!(f_sf(1.0, 2, 2).unwrap().value(), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(
            f_sf(3.5, 4, 20).unwrap().value(),
            0.0253852308664413,
            epsilon = 1e-9
        );
    }

    #[test]
    fn f_sf_edges() {
        assert_eq!(f_sf(0.0, 3, 7).unwrap().value(), 1.0);
        assert_eq!(f_sf(f64::INFINITY, 3, 7).unwrap().value(), 0.0);
        assert!(f_sf(-0.5, 1, 1).is_err());
        assert!(f_sf(1.0, 0, 5).is_err());
    }

    #[test]
    fn t_quantile_reference_values() {
        assert_abs_diff_eq!(t_quantile(0.5, 7).unwrap(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            t_quantile(0.975, 1).unwrap(),
            12.7062047361747,
            epsilon = 1e-7
        );
        assert_abs_diff_eq!(
            t_quantile(0.975, 2).unwrap(),
            4.30265272974946,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            t_quantile(0.975, 4).unwrap(),
            2.77644510519779,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            t_quantile(0.995, 10).unwrap(),
            3.16927267261695,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(
            t_quantile(0.6, 30).unwrap(),
            0.255605364951913,
            epsilon = 1e-8
        );
        // Symmetry.
        assert_abs_diff_eq!(
            t_quantile(0.025, 4).unwrap(),
            -2.77644510519779,
            epsilon = 1e-8
        );
    }

    #[test]
    fn t_quantile_rejects_out_of_domain() {
        assert!(t_quantile(0.0, 5).is_err());
        assert!(t_quantile(1.0, 5).is_err());
        assert!(t_quantile(-0.3, 5).is_err());
        assert!(t_quantile(0.5, 0).is_err());
    }

    #[test]
    fn probability_bounds() {
        assert!(Probability::new(0.0).is_ok());
        assert!(Probability::new(1.0).is_ok());
        assert!(Probability::new(-0.01).is_err());
        assert!(Probability::new(1.01).is_err());
        assert!(Probability::new(f64::NAN).is_err());
    }
}
