//! Threshold calibration against a false-alarm budget, and the optimality gap.
//!
//! Thresholds are tied together by `c_i² (h_i - 1) = v` and the common value
//! `v` is found from the false-alarm equation `f_{S^(0),ℏ}(0) = c_N² γ`.
//! `f_{S^(0)}` is strictly increasing in every `h_i`, so the root is unique.

use serde::{Deserialize, Serialize};

use crate::cusum::ThresholdVector;
use crate::delay_calc::{f_origin, FMethod};
use crate::error::{precondition, Error, Result};
use crate::kernel::SignVector;
use crate::oracles::reflected::f_mc_reflected;
use crate::sde_sim::SignalStrengths;
use crate::special::g;

/// Positive root of `g(ν) = e^ν - ν - 1 = target`.
///
/// Converges to a residual below `1e-10` or, for targets above 1, below
/// `1e-10 · target` (the absolute figure is below one ulp there).
pub fn solve_g(target: f64) -> Result<f64> {
    if target.is_nan() || target <= 0.0 || target.is_infinite() {
        return Err(Error::NoPositiveRoot(target));
    }
    // g(ν) ≥ ν²/2, and g(ln t + 2) > t once t ≥ 1
    let (mut lo, mut hi) = (
        0.0,
        if target < 1.0 {
            (2.0 * target).sqrt()
        } else {
            target.ln() + 2.0
        },
    );
    let mut nu = if target < 1.0 {
        (2.0 * target).sqrt() * 0.9
    } else {
        target.ln() + 0.5
    };
    let ok = |nu: f64| (g(nu) - target).abs() <= 1e-10 * target.max(1.0) * 0.01;
    for _ in 0..200 {
        let r = g(nu) - target;
        if r > 0.0 {
            hi = nu;
        } else {
            lo = nu;
        }
        if ok(nu) {
            break;
        }
        let mut next = nu - r / nu.exp_m1();
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if next == nu {
            break;
        }
        nu = next;
    }
    if (g(nu) - target).abs() > 1e-10 * target.max(1.0) {
        return Err(Error::RootFinding(format!(
            "g(ν) = {target} did not converge (ν = {nu})"
        )));
    }
    Ok(nu)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Symmetric,
    Asymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub gamma: f64,
    pub strengths: SignalStrengths,
    pub hbar: ThresholdVector,
    pub nu_star: f64,
    /// `g(-ν*)`.
    pub lower_bound: f64,
    /// `f_{S^(j),ℏ}(0)` for `j = 1..N`.
    pub delays: Vec<f64>,
    /// Largest entry of `delays`.
    pub j_kl: f64,
    /// Zero-based index of the largest delay.
    pub worst_sensor: usize,
    pub gap: f64,
    pub regime: Regime,
    /// `f_{S^(0),ℏ}(0)` at the returned thresholds.
    pub false_alarm: f64,
    /// How the `f` values were obtained.
    pub method: FMethod,
    /// Error estimate carried by the `f` evaluations.
    pub error_estimate: f64,
}

/// Relative residual demanded of the false-alarm equation.
pub const FALSE_ALARM_RTOL: f64 = 1e-8;

/// Paths per evaluation when thresholds fall at or below 2.
pub const ORACLE_CALIBRATION_PATHS: usize = 8_000;

fn thresholds(cs: &SignalStrengths, v: f64) -> Result<ThresholdVector> {
    ThresholdVector::new(cs.squared().iter().map(|c2| 1.0 + v / c2).collect())
}

pub fn calibrate_symmetric(n: usize, gamma: f64, tol: f64) -> Result<CalibrationResult> {
    precondition(n >= 1, || "need at least one sensor".into())?;
    calibrate(&SignalStrengths::ones(n), gamma, tol, Regime::Symmetric)
}

pub fn calibrate_asymmetric(cs: &SignalStrengths, gamma: f64, tol: f64) -> Result<CalibrationResult> {
    calibrate(cs, gamma, tol, Regime::Asymmetric)
}

fn calibrate(cs: &SignalStrengths, gamma: f64, tol: f64, regime: Regime) -> Result<CalibrationResult> {
    precondition(gamma > 0.0 && gamma.is_finite(), || {
        format!("γ = {gamma} must be positive")
    })?;
    precondition(tol > 0.0, || format!("tolerance {tol} must be positive"))?;
    if regime == Regime::Symmetric {
        precondition(cs.all_unit(), || "symmetric calibration needs |c_i| = 1".into())?;
    }
    let n = cs.len();
    let cn2 = cs.max_squared();
    let target = cn2 * gamma;
    let nu_star = solve_g(target)?;
    let s0 = SignVector::all_minus(n);
    let f_tol = (FALSE_ALARM_RTOL * target).min(tol);

    // v must keep every h_i above 2 for the series route
    let v_series = 1.05 * cn2;
    let v_lo = (target.ln() / 4.0).max(0.1).max(v_series);
    let log_f = |v: f64| -> Result<f64> {
        let h = thresholds(cs, v)?;
        Ok(f_origin(&s0, &h, cs, f_tol)?.value.ln())
    };
    let phi_lo = log_f(v_lo)? - target.ln();
    if phi_lo > 0.0 {
        log::info!("γ = {gamma} below the series regime; calibrating with the Monte Carlo oracle");
        return calibrate_oracle(cs, gamma, tol, regime, nu_star, v_lo);
    }
    let mut v_hi = v_lo.max(1.0) * 1.5;
    let mut phi_hi = log_f(v_hi)? - target.ln();
    let (mut a, mut fa) = (v_lo, phi_lo);
    while phi_hi < 0.0 {
        a = v_hi;
        fa = phi_hi;
        v_hi *= 1.5;
        phi_hi = log_f(v_hi)? - target.ln();
        if v_hi > 1e4 {
            return Err(Error::RootFinding(format!(
                "no bracket for the false-alarm equation at γ = {gamma}"
            )));
        }
    }
    let (mut b, mut fb) = (v_hi, phi_hi);
    // Illinois regula falsi on ln f
    let mut side = 0i8;
    let mut v = b;
    let mut fv = fb;
    for _ in 0..200 {
        v = (a * fb - b * fa) / (fb - fa);
        fv = log_f(v)? - target.ln();
        if fv.abs() < 0.5 * FALSE_ALARM_RTOL || (b - a).abs() < 1e-13 * b {
            break;
        }
        if (fv > 0.0) == (fb > 0.0) {
            b = v;
            fb = fv;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = v;
            fa = fv;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    if fv.abs() > FALSE_ALARM_RTOL {
        return Err(Error::RootFinding(format!(
            "false-alarm equation residual {fv:e} at γ = {gamma}"
        )));
    }
    let hbar = thresholds(cs, v)?;
    let false_alarm = f_origin(&s0, &hbar, cs, f_tol)?;
    let mut delays = Vec::with_capacity(n);
    let mut error_estimate = false_alarm.error_estimate / cn2;
    for j in 0..n {
        let d = f_origin(&SignVector::unit(n, j), &hbar, cs, tol)?;
        error_estimate = error_estimate.max(d.error_estimate);
        delays.push(d.value);
    }
    Ok(finish(
        gamma,
        cs,
        hbar,
        nu_star,
        delays,
        regime,
        false_alarm.value,
        FMethod::SeriesQuadrature,
        error_estimate,
    ))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    gamma: f64,
    cs: &SignalStrengths,
    hbar: ThresholdVector,
    nu_star: f64,
    delays: Vec<f64>,
    regime: Regime,
    false_alarm: f64,
    method: FMethod,
    error_estimate: f64,
) -> CalibrationResult {
    let (worst_sensor, j_kl) =
        delays.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, d)| if d > acc.1 { (i, d) } else { acc },
        );
    let lower_bound = g(-nu_star);
    CalibrationResult {
        gamma,
        strengths: cs.clone(),
        hbar,
        nu_star,
        lower_bound,
        delays,
        j_kl,
        worst_sensor,
        gap: j_kl - lower_bound,
        regime,
        false_alarm,
        method,
        error_estimate,
    }
}

// Bisection on Monte Carlo estimates with common random numbers. The seed is
// fixed so the result is reproducible; accuracy is that of the estimator.
fn calibrate_oracle(
    cs: &SignalStrengths,
    gamma: f64,
    tol: f64,
    regime: Regime,
    nu_star: f64,
    v_max: f64,
) -> Result<CalibrationResult> {
    let n = cs.len();
    if n > 3 {
        return Err(Error::Precondition(format!(
            "γ = {gamma} is below the series regime and the Monte Carlo oracle is limited to N ≤ 3"
        )));
    }
    let target = cs.max_squared() * gamma;
    let s0 = SignVector::all_minus(n);
    let mc = |sign: &SignVector, h: &ThresholdVector| f_mc_reflected(sign, h, cs, ORACLE_CALIBRATION_PATHS, None, 0);
    // h_1 = 1 + v must stay positive
    let (mut a, mut b) = (-0.999, v_max);
    let mut est = None;
    for _ in 0..30 {
        let v = 0.5 * (a + b);
        let e = mc(&s0, &thresholds(cs, v)?)?;
        if e.mean > target {
            b = v;
        } else {
            a = v;
        }
        est = Some(e);
        if b - a < tol.max(1e-6) * v.max(1.0) {
            break;
        }
    }
    let v = 0.5 * (a + b);
    let hbar = thresholds(cs, v)?;
    let fa = mc(&s0, &hbar)?;
    let mut err = 3.0 * est.map_or(fa.stderr, |e| e.stderr.max(fa.stderr)) / cs.max_squared();
    let mut delays = Vec::with_capacity(n);
    for j in 0..n {
        let d = mc(&SignVector::unit(n, j), &hbar)?;
        err = err.max(3.0 * d.stderr);
        delays.push(d.mean);
    }
    Ok(finish(
        gamma,
        cs,
        hbar,
        nu_star,
        delays,
        regime,
        fa.mean,
        FMethod::McOracle,
        err,
    ))
}

/// `f_{S^(j),ℏ}(0) - f_{S^(1),ℏ}(0)` for `j = 2..N`.
pub fn equalizer_residual(hbar: &ThresholdVector, cs: &SignalStrengths, tol: f64) -> Result<Vec<f64>> {
    let n = cs.len();
    if hbar.len() != n {
        return Err(Error::Dimension(format!("{} thresholds for {n} strengths", hbar.len())));
    }
    let f: Vec<f64> = (0..n)
        .map(|j| f_origin(&SignVector::unit(n, j), hbar, cs, tol).map(|v| v.value))
        .collect::<Result<_>>()?;
    Ok(f[1..].iter().map(|x| x - f[0]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn solve_g_known_roots() {
        assert!((solve_g(E - 2.0).unwrap() - 1.0).abs() < 1e-12);
        assert!((solve_g(E.powi(3) - 4.0).unwrap() - 3.0).abs() < 1e-12);
        // bisection oracle on [0, 20]
        let (mut lo, mut hi) = (0.0f64, 20.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid) > 1000.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let nu = solve_g(1000.0).unwrap();
        assert!((nu - lo).abs() < 1e-12);
        assert!((g(nu) - 1000.0).abs() < 1e-10);
    }

    #[test]
    fn solve_g_residuals_across_range() {
        for k in -3..=12 {
            let t = 10f64.powi(k);
            let nu = solve_g(t).unwrap();
            assert!((g(nu) - t).abs() <= 1e-10 * t.max(1.0), "target {t}");
        }
        assert!(matches!(solve_g(0.0), Err(Error::NoPositiveRoot(_))));
        assert!(solve_g(-1.0).is_err());
    }

    #[test]
    fn one_sensor_calibration_is_exact() {
        let r = calibrate_symmetric(1, 1e3, 1e-8).unwrap();
        assert!((r.hbar.as_slice()[0] - r.nu_star).abs() < 1e-7);
        assert!(r.gap.abs() < 1e-6);
    }

    #[test]
    fn asymmetric_thresholds_balance() {
        let cs = SignalStrengths::new(vec![1.0, 2.0]).unwrap();
        let r = calibrate_asymmetric(&cs, 1e3, 1e-8).unwrap();
        let h = r.hbar.as_slice();
        assert!(((h[0] - 1.0) - 4.0 * (h[1] - 1.0)).abs() < 1e-10);
        assert!((r.false_alarm / 4e3 - 1.0).abs() < 1e-6);
        assert!(r.j_kl >= r.lower_bound);
    }

    #[test]
    fn equalizer_symmetric_is_zero() {
        let cs = SignalStrengths::ones(3);
        let h = ThresholdVector::uniform(3, 6.0).unwrap();
        for r in equalizer_residual(&h, &cs, 1e-9).unwrap() {
            assert!(r.abs() < 1e-7);
        }
    }
}
