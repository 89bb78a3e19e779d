//! Expected detection delay and false-alarm energy at the origin,
//! `f_{S,ℏ}(0,…,0) = ∫_0^∞ Π_i K_{S_i,ε_i}(ε_i t / c_i², 0) dt` with `ε_i = 1/h_i`.
//!
//! The integral is split into three parts:
//! * `[0, t_edge]`, where every kernel equals 1 to within `3.8e-17`;
//! * `[t_edge, T]`, adaptive Gauss–Kronrod on the series kernels;
//! * `[T, ∞)`, the product of the slowest modes integrated in closed form,
//!   plus a certified bound on everything else. `T` is doubled until that
//!   bound is below a quarter of the tolerance.
//!
//! The closed-form tail matters: for all-pre-change regimes the integrand
//! decays at rate `~e^{-h}` and the tail carries almost all of the value.

use std::cell::RefCell;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cusum::{Monitoring, StreamingDetector, ThresholdVector};
use crate::error::{precondition, Error, Result};
use crate::kernel::{KernelSeries, SignVector};
use crate::oracles::reflected::{f_mc_reflected, McEstimate};
use crate::quadrature::integrate;
use crate::sde_sim::{change_step, ChangePointVector, DriftSpec, PathStream, SensorSystemSpec, SignalStrengths};
use crate::special::EDGE_MASS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FMethod {
    SeriesQuadrature,
    Asymptotic,
    McOracle,
    FdOracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FValue {
    pub value: f64,
    pub sign_vector: SignVector,
    pub hbar: ThresholdVector,
    pub strengths: SignalStrengths,
    pub error_estimate: f64,
    pub method: FMethod,
}

/// Paths used when a threshold is at or below 2 and the series does not apply.
pub const ORACLE_PATHS: usize = 40_000;

fn check_dims(sign: &SignVector, hbar: &ThresholdVector, cs: &SignalStrengths) -> Result<()> {
    if sign.len() != hbar.len() || sign.len() != cs.len() {
        return Err(Error::Dimension(format!(
            "sign has {} entries, thresholds {}, strengths {}",
            sign.len(),
            hbar.len(),
            cs.len()
        )));
    }
    Ok(())
}

/// Diagnostics of a series evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FBreakdown {
    pub t_edge: f64,
    pub t_cut: f64,
    pub edge_part: f64,
    pub quadrature: f64,
    pub quadrature_error: f64,
    pub tail: f64,
    pub tail_bound: f64,
    pub kernel_error: f64,
    pub evaluations: usize,
}

pub fn f_origin(sign: &SignVector, hbar: &ThresholdVector, cs: &SignalStrengths, tol: f64) -> Result<FValue> {
    check_dims(sign, hbar, cs)?;
    precondition(tol > 0.0, || format!("tolerance {tol} must be positive"))?;
    if hbar.as_slice().iter().all(|&h| h > 2.0) {
        let (value, error, _) = f_series(sign, hbar, cs, tol)?;
        Ok(FValue {
            value,
            sign_vector: sign.clone(),
            hbar: hbar.clone(),
            strengths: cs.clone(),
            error_estimate: error,
            method: FMethod::SeriesQuadrature,
        })
    } else {
        let est = f_mc_reflected(sign, hbar, cs, ORACLE_PATHS, None, 0)?;
        Ok(FValue {
            value: est.mean,
            sign_vector: sign.clone(),
            hbar: hbar.clone(),
            strengths: cs.clone(),
            error_estimate: 3.0 * est.stderr,
            method: FMethod::McOracle,
        })
    }
}

/// Series evaluation with its breakdown; requires every `h_i > 2`.
pub fn f_series(
    sign: &SignVector,
    hbar: &ThresholdVector,
    cs: &SignalStrengths,
    tol: f64,
) -> Result<(f64, f64, FBreakdown)> {
    check_dims(sign, hbar, cs)?;
    precondition(tol > 0.0, || format!("tolerance {tol} must be positive"))?;
    let n = sign.len();
    let c2 = cs.squared();
    let kernels: Vec<KernelSeries> = sign
        .signs()
        .iter()
        .zip(hbar.as_slice())
        .map(|(&s, &h)| KernelSeries::new(s, 1.0 / h))
        .collect::<Result<_>>()?;
    // kernel i is evaluated at s = scale_i * t
    let scale: Vec<f64> = kernels.iter().zip(&c2).map(|(k, c)| k.eps() / c).collect();
    let t_edge = kernels
        .iter()
        .zip(&scale)
        .map(|(k, s)| k.edge_time() / s)
        .fold(f64::INFINITY, f64::min);

    let leads: Vec<(f64, f64)> = kernels
        .iter()
        .zip(&scale)
        .map(|(k, s)| {
            let (a, r) = k.leading_mode();
            (a, r * s)
        })
        .collect();
    let total_rate: f64 = leads.iter().map(|l| l.1).sum();
    let tail_bound_at = |t: f64| -> f64 {
        let parts: Vec<(f64, f64, f64)> = kernels
            .iter()
            .zip(&scale)
            .zip(&leads)
            .map(|((k, s), &(a, lam))| {
                let (r, rho) = k.remainder_bound(s * t);
                (a.abs() * (-lam * t).exp(), r, rho * s)
            })
            .collect();
        (0..n)
            .map(|i| {
                let others: f64 = (0..n).filter(|&j| j != i).map(|j| parts[j].0 + parts[j].1).product();
                let rate = parts[i].2 + total_rate - leads[i].1;
                parts[i].1 * others / rate
            })
            .sum()
    };
    let mut t_cut = (4.0 * t_edge).max(1.0);
    let mut tail_bound = tail_bound_at(t_cut);
    while tail_bound > 0.25 * tol {
        t_cut *= 2.0;
        tail_bound = tail_bound_at(t_cut);
        if t_cut > 1e12 {
            return Err(Error::NonFinite(format!("tail cutoff diverged for {sign:?}, {hbar:?}")));
        }
    }
    let log_lead: f64 = leads.iter().map(|(a, _)| a.ln()).sum();
    let tail = (log_lead - total_rate * t_cut - total_rate.ln()).exp();

    let span = t_cut - t_edge;
    let kernel_tol = (tol / (8.0 * n as f64 * span)).max(1e-300);
    let max_rounding = RefCell::new(0.0f64);
    let failure: RefCell<Option<Error>> = RefCell::new(None);
    let integrand = |t: f64| {
        let mut prod = 1.0;
        let mut rounding = 0.0;
        for (k, s) in kernels.iter().zip(&scale) {
            match k.eval(s * t, kernel_tol) {
                Ok(e) => {
                    prod *= e.value;
                    rounding += e.rounding;
                }
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    return f64::NAN;
                }
            }
        }
        let mut m = max_rounding.borrow_mut();
        *m = m.max(rounding);
        prod
    };
    let quad = integrate(integrand, t_edge, t_cut, 0.5 * tol);
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let quad = quad?;
    let kernel_error = (kernel_tol * n as f64 + max_rounding.into_inner()) * span + EDGE_MASS * n as f64 * t_edge;
    let value = t_edge + quad.value + tail;
    let error = quad.error + tail_bound + kernel_error;
    Ok((
        value,
        error,
        FBreakdown {
            t_edge,
            t_cut,
            edge_part: t_edge,
            quadrature: quad.value,
            quadrature_error: quad.error,
            tail,
            tail_bound,
            kernel_error,
            evaluations: quad.evaluations,
        },
    ))
}

/// Leading false-alarm term `1 / Σ_i c_i^{-2} e^{-h_i}`.
pub fn f_false_alarm_asymptotic(hbar: &ThresholdVector, cs: &SignalStrengths) -> f64 {
    let hs = hbar.as_slice();
    // factor out the smallest h to avoid underflow
    let hmin = hs.iter().copied().fold(f64::INFINITY, f64::min);
    let s: f64 = hs.iter().zip(cs.squared()).map(|(h, c2)| (hmin - h).exp() / c2).sum();
    hmin.exp() / s
}

/// Leading delay term `c_j² (h_j - 1)` for chart `j` (zero-based).
pub fn f_delay_asymptotic(j: usize, hbar: &ThresholdVector, cs: &SignalStrengths) -> f64 {
    cs.squared()[j] * (hbar.as_slice()[j] - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayMcOptions {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub monitoring: Monitoring,
    /// Paths still running at this time are censored; `None` picks a
    /// horizon far beyond the expected false-alarm time.
    pub max_horizon: Option<f64>,
}

impl DelayMcOptions {
    pub fn new(n_paths: usize, dt: f64, seed: u64) -> Self {
        DelayMcOptions {
            n_paths,
            dt,
            seed,
            monitoring: Monitoring::Bridge,
            max_horizon: None,
        }
    }
}

/// Energy accumulated by one simulated path, and whether the detector fired.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub energy: f64,
    pub stop_time: f64,
    pub stopped: bool,
    pub firing_sensor: Option<usize>,
}

fn default_horizon(spec: &SensorSystemSpec, hbar: &ThresholdVector) -> f64 {
    let c2 = spec.cs.squared();
    let energy = spec.cs.max_squared() * f_false_alarm_asymptotic(hbar, &spec.cs)
        + hbar.as_slice().iter().zip(&c2).map(|(h, c)| h * c).sum::<f64>()
        + 10.0;
    match spec.drift {
        DriftSpec::Constant { mu } => 100.0 * energy * 2.0 / (mu * mu),
        _ => 100.0 * energy.max(1000.0),
    }
}

/// Simulates and monitors one path. The energy clock is `∫ ½ α_1² ds` of the
/// model drift from `τ̃` on, or `∫ ½ (α_1/c_N)² ds` from 0 when `τ̃ = ∞`.
pub fn simulate_outcome(
    spec: &SensorSystemSpec,
    taus: &ChangePointVector,
    hbar: &ThresholdVector,
    opts: &DelayMcOptions,
    horizon: f64,
    path: u64,
) -> Result<PathOutcome> {
    let n = spec.n();
    let mut ps = PathStream::new(spec, taus, opts.dt, opts.seed, path)?;
    let mut det = StreamingDetector::new(spec, hbar, opts.monitoring, opts.seed, path)?;
    let tau = taus.min_finite();
    let k_tau = change_step(tau, opts.dt);
    let weight = if k_tau.is_none() {
        1.0 / spec.cs.max_squared()
    } else {
        1.0
    };
    let mut dz = vec![0.0; n];
    let mut energy = 0.0;
    loop {
        ps.step(&mut dz)?;
        let k = ps.step_index();
        if k_tau.is_none_or(|kt| k > kt) {
            let a = ps.model_drift()[0];
            energy += 0.5 * weight * a * a * opts.dt;
        }
        if let Some(r) = det.feed(opts.dt, &dz)? {
            return Ok(PathOutcome {
                energy,
                stop_time: ps.t(),
                stopped: true,
                firing_sensor: r.firing_sensor,
            });
        }
        if ps.t() >= horizon {
            return Ok(PathOutcome {
                energy,
                stop_time: ps.t(),
                stopped: false,
                firing_sensor: None,
            });
        }
    }
}

/// Runs `opts.n_paths` independent paths (in parallel, reproducibly).
pub fn simulate_outcomes(
    spec: &SensorSystemSpec,
    taus: &ChangePointVector,
    hbar: &ThresholdVector,
    opts: &DelayMcOptions,
) -> Result<Vec<PathOutcome>> {
    let horizon = opts.max_horizon.unwrap_or_else(|| default_horizon(spec, hbar));
    (0..opts.n_paths as u64)
        .into_par_iter()
        .map(|p| simulate_outcome(spec, taus, hbar, opts, horizon, p))
        .collect()
}

/// Monte Carlo estimate of the expected post-change energy to detection
/// (false-alarm energy in the `c_N^{-1}` clock when no sensor changes).
pub fn expected_delay_mc_with(
    spec: &SensorSystemSpec,
    taus: &ChangePointVector,
    hbar: &ThresholdVector,
    opts: &DelayMcOptions,
) -> Result<McEstimate> {
    precondition(opts.n_paths >= 100, || {
        format!("need at least 100 paths, got {}", opts.n_paths)
    })?;
    let outcomes = simulate_outcomes(spec, taus, hbar, opts)?;
    let nonstopping = outcomes.iter().filter(|o| !o.stopped).count();
    if nonstopping * 1000 > opts.n_paths {
        let horizon = outcomes.iter().map(|o| o.stop_time).fold(0.0, f64::max);
        return Err(Error::NonStopping {
            nonstopping,
            total: opts.n_paths,
            horizon,
        });
    }
    let energies: Vec<f64> = outcomes.iter().map(|o| o.energy).collect();
    Ok(McEstimate::from_samples(&energies))
}

pub fn expected_delay_mc(
    spec: &SensorSystemSpec,
    taus: &ChangePointVector,
    hbar: &ThresholdVector,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<McEstimate> {
    expected_delay_mc_with(spec, taus, hbar, &DelayMcOptions::new(n_paths, dt, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::g;

    fn tv(h: &[f64]) -> ThresholdVector {
        ThresholdVector::new(h.to_vec()).unwrap()
    }

    fn sc(c: &[f64]) -> SignalStrengths {
        SignalStrengths::new(c.to_vec()).unwrap()
    }

    #[test]
    fn one_sensor_closed_forms() {
        for &h in &[2.5, 3.0, 5.0, 8.0, 12.0] {
            let plus = f_origin(&SignVector::unit(1, 0), &tv(&[h]), &sc(&[1.0]), 1e-9).unwrap();
            let minus = f_origin(&SignVector::all_minus(1), &tv(&[h]), &sc(&[1.0]), 1e-9).unwrap();
            assert!((plus.value - g(-h)).abs() < 1e-8, "h {h}: {} vs {}", plus.value, g(-h));
            assert!(
                (minus.value / g(h) - 1.0).abs() < 1e-9,
                "h {h}: {} vs {}",
                minus.value,
                g(h)
            );
            assert!(plus.error_estimate <= 1e-9 && minus.error_estimate <= 1e-9);
        }
        let v = f_origin(&SignVector::unit(1, 0), &tv(&[5.0]), &sc(&[1.0]), 1e-8).unwrap();
        assert!((v.value - 4.006_737_9).abs() < 1e-7);
        let v = f_origin(&SignVector::all_minus(1), &tv(&[3.0]), &sc(&[1.0]), 1e-8).unwrap();
        assert!((v.value - 16.085_5).abs() < 1e-4);
    }

    #[test]
    fn strength_rescales_time() {
        // one chart with strength c: f = c² g(∓h)
        let v = f_origin(&SignVector::unit(2, 1), &tv(&[40.0, 4.0]), &sc(&[1.0, 2.0]), 1e-9).unwrap();
        assert!((v.value - 4.0 * g(-4.0)).abs() < 1e-4, "{}", v.value);
    }

    #[test]
    fn small_thresholds_use_the_oracle() {
        let v = f_origin(&SignVector::unit(1, 0), &tv(&[2.0]), &sc(&[1.0]), 1e-6).unwrap();
        assert_eq!(v.method, FMethod::McOracle);
        assert!((v.value - g(-2.0)).abs() < v.error_estimate);
    }

    #[test]
    fn dimension_mismatch() {
        let r = f_origin(&SignVector::all_minus(2), &tv(&[3.0]), &sc(&[1.0, 1.0]), 1e-6);
        assert!(matches!(r, Err(Error::Dimension(_))));
        assert!(f_origin(&SignVector::all_minus(1), &tv(&[3.0]), &sc(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn asymptotic_forms() {
        let e10 = 10f64.exp();
        assert!((f_false_alarm_asymptotic(&tv(&[10.0, 10.0]), &sc(&[1.0, 1.0])) - e10 / 2.0).abs() < 1e-9);
        assert!((f_false_alarm_asymptotic(&tv(&[10.0]), &sc(&[1.0])) - e10).abs() < 1e-9);
        assert!((f_false_alarm_asymptotic(&tv(&[10.0, 10.0]), &sc(&[1.0, 2.0])) - 0.8 * e10).abs() < 1e-8);
        assert_eq!(f_delay_asymptotic(0, &tv(&[6.0, 3.0]), &sc(&[1.0, 2.0])), 5.0);
        assert_eq!(f_delay_asymptotic(1, &tv(&[6.0, 2.0]), &sc(&[1.0, 2.0])), 4.0);
        assert_eq!(f_delay_asymptotic(0, &tv(&[1.0]), &sc(&[1.0])), 0.0);
    }

    #[test]
    fn false_alarm_leading_term() {
        let f = f_origin(&SignVector::all_minus(2), &tv(&[8.0, 8.0]), &sc(&[1.0, 1.0]), 1e-6).unwrap();
        let lead = 8f64.exp() / 2.0;
        assert!((f.value - lead).abs() < 5.0 * 8.0, "{} vs {lead}", f.value);
    }
}
