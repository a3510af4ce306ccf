//! Log-gamma and the scaled parabolic cylinder function Dtilde.
//!
//! Dtilde_v(y) = e^{y^2/4} D_{-v}(y) solves f'' - y f' - v f = 0 and is the
//! building block of every closed form in the crate. Useful identities, all
//! exercised by tests:
//!   Dtilde_0(y) = 1,
//!   Dtilde_v'(y) = -v Dtilde_{v+1}(y),
//!   (v+1) Dtilde_{v+2}(y) = Dtilde_v(y) - y Dtilde_{v+1}(y),
//!   Dtilde_1(y) = e^{y^2/2} sqrt(pi/2) erfc(y/sqrt(2)).

use crate::model::ModelParams;
use crate::num::CompensatedSum;
use crate::{Error, Result};

use std::f64::consts::PI;

/// Natural log of the gamma function for x > 0.
///
/// Lanczos approximation (g = 7, 9 terms) with reflection below 1/2.
/// Relative error is a few ulps away from the zeros of log-gamma; absolute
/// error stays below 1e-14 near them.
pub fn log_gamma(x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!("log_gamma requires x > 0, got {x}")));
    }
    if x < 0.5 {
        // Gamma(x) Gamma(1-x) = pi / sin(pi x); both factors positive here.
        return Ok((PI / (PI * x).sin()).ln() - log_gamma(1.0 - x)?);
    }
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    let z = x - 1.0;
    let mut sum = C[0];
    for (i, &c) in C.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + G + 0.5;
    Ok(0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + sum.ln())
}

/// Accuracy target of pcf_dtilde used by the routing logic below.
const PCF_REL_TOL: f64 = 1e-12;
/// Above this value/parts ratio the ascending series has lost too many digits.
const SERIES_CANCEL_MAX: f64 = 1e3;
/// The series is attempted first for y at or below this.
const SERIES_Y_MAX: f64 = 4.0;
/// The asymptotic expansion is only considered from here on.
const ASYMPTOTIC_Y_MIN: f64 = 10.0;

/// Scaled parabolic cylinder function Dtilde_v(y) for v >= 0.
///
/// Positive on the whole real line. Evaluation routes between the ascending
/// series (y <= 4, or any negative y; the two series halves reinforce rather
/// than cancel for y <= 0), the positive-integrand integral representation
/// (1/Gamma(v)) Int_0^inf t^{v-1} e^{-t^2/2 - y t} dt (larger y), and the
/// large-y asymptotic expansion when its terms provably reach 1e-12. The
/// series reports its own cancellation and defers to the integral when more
/// than ~3 digits would be lost.
pub fn pcf_dtilde(v: f64, y: f64) -> Result<f64> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::Domain(format!("pcf_dtilde requires v >= 0, got {v}")));
    }
    if !y.is_finite() {
        return Err(Error::Domain(format!("pcf_dtilde requires finite y, got {y}")));
    }
    if v == 0.0 {
        // 1/Gamma(0) = 0 removes the odd half and every even term past k = 0.
        return Ok(1.0);
    }
    let value = if y <= SERIES_Y_MAX {
        match dtilde_series(v, y)? {
            SeriesOutcome::Ok(val) => val,
            SeriesOutcome::Cancelled => dtilde_integral(v, y)?,
        }
    } else {
        match dtilde_asymptotic(v, y) {
            Some(val) => val,
            None => dtilde_integral(v, y)?,
        }
    };
    if !(value.is_finite() && value > 0.0) {
        return Err(Error::Numerical(format!(
            "pcf_dtilde({v}, {y}) evaluated to {value}"
        )));
    }
    Ok(value)
}

enum SeriesOutcome {
    Ok(f64),
    /// The even/odd halves cancelled too strongly for the requested accuracy.
    Cancelled,
}

/// Ascending (confluent hypergeometric) series. Both halves have nonnegative
/// terms, so each half is well conditioned; for y > 0 the halves cancel
/// against each other, which is measured and reported.
fn dtilde_series(v: f64, y: f64) -> Result<SeriesOutcome> {
    let y2 = y * y;
    let mut even = CompensatedSum::new();
    let mut odd = CompensatedSum::new();
    let mut e_term = 1.0f64;
    let mut o_term = 1.0f64;
    even.add(e_term);
    odd.add(o_term);
    let mut k = 0usize;
    loop {
        let kf = 2.0 * k as f64;
        e_term *= (v + kf) * y2 / ((kf + 1.0) * (kf + 2.0));
        o_term *= (v + kf + 1.0) * y2 / ((kf + 2.0) * (kf + 3.0));
        even.add(e_term);
        odd.add(o_term);
        k += 1;
        if e_term > 1e280 || o_term > 1e280 {
            return Err(Error::NonConvergence(format!(
                "dtilde series overflow at v = {v}, y = {y}"
            )));
        }
        if e_term <= 1e-18 * even.value() && o_term <= 1e-18 * odd.value() {
            break;
        }
        if k > 700 {
            return Err(Error::NonConvergence(format!(
                "dtilde series needs > 700 terms at v = {v}, y = {y}"
            )));
        }
    }
    // Dtilde = 2^{-v/2} sqrt(pi) [ S_even / Gamma((v+1)/2) - sqrt(2) y S_odd / Gamma(v/2) ]
    let scale = -0.5 * v * 2.0f64.ln() + 0.5 * PI.ln();
    let part_even = (scale - log_gamma(0.5 * (v + 1.0))?).exp() * even.value();
    let part_odd = -(2.0f64).sqrt() * y * (scale - log_gamma(0.5 * v)?).exp() * odd.value();
    let value = part_even + part_odd;
    let cancel = (part_even.abs() + part_odd.abs()) / value.abs().max(f64::MIN_POSITIVE);
    if !value.is_finite() || cancel > SERIES_CANCEL_MAX {
        return Ok(SeriesOutcome::Cancelled);
    }
    Ok(SeriesOutcome::Ok(value))
}

/// Integral representation for v > 0, any y: all integrand values positive,
/// so no cancellation at any scale. Evaluated with the exp-sinh double
/// exponential transform t = exp((pi/2) sinh u) and trapezoid refinement.
///
/// For large v the integrand is a sharp bump at t* = (-y + sqrt(y^2 + 4v))/2,
/// far from u = 0. Every exponent is taken relative to the bump height so the
/// sum neither overflows nor degenerates, and the early-exit counters only
/// engage once the outward walk has passed the bump.
fn dtilde_integral(v: f64, y: f64) -> Result<f64> {
    debug_assert!(v > 0.0);
    let t_peak = 0.5 * (-y + (y * y + 4.0 * v).sqrt());
    let w_peak = t_peak.max(f64::MIN_POSITIVE).ln();
    let u_peak = (2.0 * w_peak / PI).asinh();
    let log_offset = v * w_peak - 0.5 * t_peak * t_peak - y * t_peak;
    let term = |u: f64| -> f64 {
        let w = 0.5 * PI * u.sinh();
        if w > 200.0 + w_peak.abs() {
            // t^2/2 = e^{2w}/2 dwarfs every other exponent contribution
            return 0.0;
        }
        let t = w.exp();
        let log_term = v * w - 0.5 * t * t - y * t + (0.5 * PI * u.cosh()).ln();
        (log_term - log_offset).exp()
    };
    // negligible only counts beyond the bump; before it small values are the
    // approach, not the tail
    let past_peak = |u: f64, dir: f64| (u - u_peak) * dir >= 0.0;

    const U_MAX: f64 = 12.0;
    // level 0: trapezoid at spacing h0; each level halves the spacing by
    // summing the new midpoints only
    let h0 = 0.5;
    let mut total = CompensatedSum::new();
    total.add(term(0.0));
    for dir in [-1.0, 1.0] {
        let mut small = 0;
        let mut k = 1;
        while (k as f64) * h0 <= U_MAX {
            let u = dir * k as f64 * h0;
            let t = term(u);
            total.add(t);
            small = if past_peak(u, dir) && t <= 1e-19 * total.value() {
                small + 1
            } else {
                0
            };
            if small >= 3 {
                break;
            }
            k += 1;
        }
    }
    let mut h = h0;
    let mut estimate = total.value() * h;
    let mut change = f64::INFINITY;
    for level in 0..12 {
        let half = 0.5 * h;
        let mut mid = CompensatedSum::new();
        for dir in [-1.0, 1.0] {
            let mut small = 0;
            let mut k = 0;
            loop {
                let u = dir * (k as f64 * h + half);
                if u.abs() > U_MAX {
                    break;
                }
                let t = term(u);
                mid.add(t);
                small = if past_peak(u, dir) && t <= 1e-19 * (total.value() + mid.value()) {
                    small + 1
                } else {
                    0
                };
                if small >= 3 {
                    break;
                }
                k += 1;
            }
        }
        total.add(mid.value());
        h = half;
        let new_estimate = total.value() * h;
        change = (new_estimate - estimate).abs();
        estimate = new_estimate;
        if change <= 1e-13 * estimate.abs() && level >= 3 {
            break;
        }
    }
    if !(estimate.is_finite() && estimate > 0.0) {
        return Err(Error::Numerical(format!(
            "dtilde integral failed at v = {v}, y = {y}: {estimate}"
        )));
    }
    if change > 1e-10 * estimate.abs() {
        return Err(Error::NonConvergence(format!(
            "dtilde integral refinement stalled at v = {v}, y = {y}"
        )));
    }
    Ok((estimate.ln() + log_offset - log_gamma(v)?).exp())
}

/// Large-y expansion Dtilde_v(y) ~ y^{-v} sum_k (-1)^k (v)_{2k} / (k! 2^k y^{2k}).
/// Divergent; accepted only when the smallest term certifies 1e-12.
fn dtilde_asymptotic(v: f64, y: f64) -> Option<f64> {
    if y < ASYMPTOTIC_Y_MIN {
        return None;
    }
    let y2 = y * y;
    let mut term = 1.0f64;
    let mut sum = CompensatedSum::new();
    sum.add(term);
    for k in 0..60 {
        let kf = 2.0 * k as f64;
        let next = -term * (v + kf) * (v + kf + 1.0) / (2.0 * (k as f64 + 1.0) * y2);
        if next.abs() >= term.abs() {
            // divergence onset before certifying the target
            return None;
        }
        term = next;
        sum.add(term);
        if term.abs() <= PCF_REL_TOL * 1e-1 * sum.value().abs() {
            return Some((-v * y.ln()).exp() * sum.value());
        }
    }
    None
}

/// H(r) = Dtilde_{b/a + 1}(z) / Dtilde_{b/a}(z) at z = (m - r)/sigma, where m
/// is the hit-measure mean. Strictly increasing and convex in r; the optimal
/// barrier solves H(r*) = sigma / b.
pub fn h_ratio(params: &ModelParams, r: f64) -> Result<f64> {
    let d = params.derived();
    let nu = d.b / params.a;
    let z = (params.hit_measure_mean() - r) / d.sigma;
    Ok(pcf_dtilde(nu + 1.0, z)? / pcf_dtilde(nu, z)?)
}

/// dH/dr, closed form from the two contiguous recurrences of Dtilde:
/// sigma H'(r) = 1 - z H - nu H^2 with z = (m - r)/sigma.
pub fn h_ratio_deriv(params: &ModelParams, r: f64) -> Result<f64> {
    let d = params.derived();
    let nu = d.b / params.a;
    let z = (params.hit_measure_mean() - r) / d.sigma;
    let h = h_ratio(params, r)?;
    Ok((1.0 - z * h - nu * h * h) / d.sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn log_gamma_frozen_values() {
        assert!(log_gamma(1.0).unwrap().abs() < 1e-14);
        assert!(log_gamma(2.0).unwrap().abs() < 1e-14);
        assert_relative_eq!(
            log_gamma(0.5).unwrap(),
            0.572_364_942_924_700_1,
            max_relative = 1e-13
        );
        assert_relative_eq!(
            log_gamma(5.0).unwrap(),
            3.178_053_830_347_945_8,
            max_relative = 1e-13
        );
        // reflection region
        assert_relative_eq!(
            log_gamma(0.1).unwrap(),
            2.252_712_651_734_205_7,
            max_relative = 1e-13
        );
        assert!(log_gamma(0.0).is_err());
        assert!(log_gamma(-3.0).is_err());
        assert!(log_gamma(f64::NAN).is_err());
    }

    // mpmath (40 digits): exp(y^2/4) * pcfd(-v, y)
    const FROZEN: &[(f64, f64, f64)] = &[
        (1.0, 1.0, 0.655_679_542_418_798_472),
        (2.0, -1.5, 11.807_714_510_912_167_7),
        (2.0, 1.5, 0.226_276_542_673_054_967),
        (2.0, 12.0, 0.006_804_561_983_569_872_97),
        (0.7, 4.5, 0.339_737_131_033_942_003),
        (2.0, -9.3, 1.408_113_793_170_030_57e20),
        (12.5, -6.0, 4_113_337_117.037_887_53),
        (3.0, 0.0, 0.626_657_068_657_750_126),
        (6.0, 2.0, 0.001_379_745_342_468_873_35),
        (20.0, -3.0, 0.010_286_217_984_848_143_1),
    ];

    #[test]
    fn dtilde_frozen_values_across_regimes() {
        for &(v, y, want) in FROZEN {
            let got = pcf_dtilde(v, y).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn dtilde_exact_points() {
        // Dtilde_2(0) = 2^{-1} sqrt(pi) / Gamma(3/2) = 1 exactly
        assert_relative_eq!(pcf_dtilde(2.0, 0.0).unwrap(), 1.0, max_relative = 1e-14);
        // Dtilde_1(0) = sqrt(pi/2)
        assert_relative_eq!(
            pcf_dtilde(1.0, 0.0).unwrap(),
            (PI / 2.0).sqrt(),
            max_relative = 1e-14
        );
        for y in [-10.0, -3.7, 0.0, 2.2, 8.5, 10.0] {
            assert_eq!(pcf_dtilde(0.0, y).unwrap(), 1.0);
        }
    }

    #[test]
    fn dtilde_rejects_bad_inputs() {
        assert!(pcf_dtilde(-0.5, 1.0).is_err());
        assert!(pcf_dtilde(f64::NAN, 1.0).is_err());
        assert!(pcf_dtilde(1.0, f64::INFINITY).is_err());
    }

    #[test]
    fn erfc_identity_for_order_one() {
        // Dtilde_1(y) = e^{y^2/2} sqrt(pi/2) erfc(y / sqrt 2); libm's erfc is
        // good to a couple ulps, so the identity itself carries the tolerance
        let mut y = -5.0f64;
        while y <= 5.0 {
            let want = (0.5 * y * y).exp() * (PI / 2.0).sqrt() * libm::erfc(y / 2.0f64.sqrt());
            let got = pcf_dtilde(1.0, y).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-12);
            y += 0.125;
        }
    }

    #[test]
    fn series_and_integral_agree_on_overlap() {
        // positive y with real cancellation, yet inside the series guard
        for &(v, y) in &[(0.5, 2.0), (1.0, 2.5), (2.0, 2.2), (3.0, 1.8)] {
            let series = match dtilde_series(v, y).unwrap() {
                SeriesOutcome::Ok(val) => val,
                SeriesOutcome::Cancelled => panic!("series should hold at ({v}, {y})"),
            };
            let integral = dtilde_integral(v, y).unwrap();
            assert_relative_eq!(series, integral, max_relative = 1e-11);
        }
        // near the guard the series must either agree or bow out, never lie
        for &(v, y) in &[(0.5, 3.5), (1.0, 3.9), (2.0, 3.0), (3.0, 2.5)] {
            if let SeriesOutcome::Ok(series) = dtilde_series(v, y).unwrap() {
                let integral = dtilde_integral(v, y).unwrap();
                assert_relative_eq!(series, integral, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn integral_matches_reference_at_high_order() {
        // 50-digit quadrature of the same integral, orders the psi2 series hits
        for &(v, y, want) in &[
            (100.0, 0.358_093_804_342_436_7, 1.064_330_868_84e-80),
            (100.0, -0.349_012_976_844_110_87, 1.229_701_742_48e-77),
            (122.0, 0.358_093_804_342_436_7, 2.362_522_544_56e-103),
            (122.0, -0.349_012_976_844_110_87, 5.725_721_427_06e-100),
        ] {
            let got = pcf_dtilde(v, y).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-10);
        }
    }

    #[test]
    fn asymptotic_and_integral_agree_at_large_y() {
        for &(v, y) in &[(1.0, 10.0), (2.0, 12.0), (0.5, 15.0), (4.0, 14.0)] {
            let asym = dtilde_asymptotic(v, y).expect("asymptotic should certify here");
            let integral = dtilde_integral(v, y).unwrap();
            assert_relative_eq!(asym, integral, max_relative = 1e-11);
        }
    }

    #[test]
    fn large_order_series_stays_stable_at_small_positive_y() {
        // orders up to ~122 appear in the psi2 series; y stays below ~2.4 there
        let got = pcf_dtilde(122.0, 2.4).unwrap();
        assert!(got.is_finite() && got > 0.0);
        // recurrence consistency ties three adjacent orders together
        let a = pcf_dtilde(120.0, 2.4).unwrap();
        let b = pcf_dtilde(121.0, 2.4).unwrap();
        let c = pcf_dtilde(122.0, 2.4).unwrap();
        assert_relative_eq!(121.0 * c, a - 2.4 * b, max_relative = 1e-9);
    }

    #[test]
    fn h_ratio_frozen_and_shape() {
        let p = ModelParams::example();
        // H(0) = Dtilde_3(0)/Dtilde_2(0) = sqrt(pi/2)/2
        assert_relative_eq!(
            h_ratio(&p, 0.0).unwrap(),
            0.626_657_068_657_75,
            max_relative = 1e-10
        );
        // strictly increasing and midpoint convex on a grid
        let h = 0.25;
        let mut prev = f64::NEG_INFINITY;
        let mut i = -24;
        while i <= 24 {
            let r = i as f64 * h;
            let v = h_ratio(&p, r).unwrap();
            assert!(v > prev, "H not increasing at r = {r}");
            let d2 = h_ratio(&p, r + h).unwrap() - 2.0 * v + h_ratio(&p, r - h).unwrap();
            assert!(d2 >= -1e-8, "H not midpoint convex at r = {r}: {d2}");
            prev = v;
            i += 1;
        }
    }

    #[test]
    fn h_ratio_deriv_matches_central_difference() {
        let p = ModelParams::example();
        let eps = 1e-6;
        for &r in &[-3.0, -1.0, 0.0, 0.5, 1.5, 3.0] {
            let num = (h_ratio(&p, r + eps).unwrap() - h_ratio(&p, r - eps).unwrap()) / (2.0 * eps);
            let want = h_ratio_deriv(&p, r).unwrap();
            assert_relative_eq!(num, want, max_relative = 1e-7);
        }
    }

    #[test]
    fn derivative_identity_by_central_difference() {
        // Dtilde_v'(y) = -v Dtilde_{v+1}(y)
        let eps = 1e-5;
        for &(v, y) in &[(1.0, 0.3), (2.0, -1.0), (0.5, 2.0), (3.5, -4.0)] {
            let num =
                (pcf_dtilde(v, y + eps).unwrap() - pcf_dtilde(v, y - eps).unwrap()) / (2.0 * eps);
            let want = -v * pcf_dtilde(v + 1.0, y).unwrap();
            assert_relative_eq!(num, want, max_relative = 1e-7);
        }
    }

    proptest! {
        #![proptest_config(proptest::test_runner::Config::with_cases(48))]
        #[test]
        fn positivity_and_recurrence(v in 0.0f64..18.0, y in -9.0f64..9.0) {
            let d0 = pcf_dtilde(v, y).unwrap();
            let d1 = pcf_dtilde(v + 1.0, y).unwrap();
            let d2 = pcf_dtilde(v + 2.0, y).unwrap();
            prop_assert!(d0 > 0.0 && d1 > 0.0 && d2 > 0.0);
            // (v+1) Dtilde_{v+2} = Dtilde_v - y Dtilde_{v+1}; skip the
            // comparison when the right side nearly cancels
            let rhs = d0 - y * d1;
            let scale = d0.abs().max((y * d1).abs());
            if rhs.abs() > 1e-6 * scale {
                let lhs = (v + 1.0) * d2;
                prop_assert!(((lhs - rhs) / rhs).abs() < 1e-8,
                    "recurrence off at v={}, y={}: lhs={}, rhs={}", v, y, lhs, rhs);
            }
        }
    }
}
