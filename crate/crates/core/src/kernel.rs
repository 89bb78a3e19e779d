//! Survival kernels `K_{±1,ε}(s, 0)` and their eigenfunction expansions.
//!
//! `K_{S,ε}(s, z)` solves `K_s = ε K_zz + S K_z` on `0 < z < 1`, reflecting
//! at `z = 0`, absorbing at `z = 1`, with `K(0, z) = 1`. Probabilistically it
//! is the chance that a reflected Brownian motion with drift `S` and variance
//! `2ε` per unit time, started at `z`, has not reached 1 by time `s`.
//!
//! For `0 < ε < 1/2` the kernel at the origin is an exponential series whose
//! decay rates come from the roots of `tanh ω = 2εω`, `tan ω = 2εω` (drift
//! `-1`) and `tan ω = -2εω` (drift `+1`). Coefficients are carried in log
//! form because the `+1` series has terms of size `e^{1/(2ε)}`.
//!
//! Write `k = 1/(2ε)`. Then, for drift `-1`,
//!
//! ```text
//! K(s) = A0 e^{-ε δ (2k - δ) s}
//!      + Σ_n A_n e^{-k} (sin ω_n / ω_n) e^{-(ε ω_n² + k/2) s}
//! A0  = e^{-δ} (1 - e^{-2ω})³ / (1 - e^{-4ω} - 4ω e^{-2ω}),   δ = k - ω
//! A_n = 8ε²ω_n² / (4ε²ω_n² + 1 - 2ε)
//! ```
//!
//! and for drift `+1`
//!
//! ```text
//! K(s) = Σ_n B_n e^{k} (sin ω'_n / ω'_n) e^{-(ε ω'_n² + k/2) s}
//! B_n  = 8ε²ω'_n² / (4ε²ω'_n² + 1 + 2ε)
//! ```

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{precondition, Error, Result};
use crate::special::{EDGE_MASS, EDGE_Z};

/// Post-change (`Plus`) or pre-change (`Minus`) drift direction of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Minus,
    Plus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Minus => -1.0,
            Sign::Plus => 1.0,
        }
    }

    pub fn from_int(v: i64) -> Result<Sign> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            _ => Err(Error::Precondition(format!("sign must be +1 or -1, got {v}"))),
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Minus => -1,
            Sign::Plus => 1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Sign, String> {
        Sign::from_int(v as i64).map_err(|e| e.to_string())
    }
}

/// A regime `S ∈ {±1}^N`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SignVector {
    signs: Vec<Sign>,
}

impl SignVector {
    pub fn new(signs: Vec<Sign>) -> Self {
        SignVector { signs }
    }

    pub fn from_ints(v: &[i64]) -> Result<Self> {
        Ok(SignVector {
            signs: v.iter().map(|&x| Sign::from_int(x)).collect::<Result<_>>()?,
        })
    }

    /// `S^(0)`: every chart pre-change.
    pub fn all_minus(n: usize) -> Self {
        SignVector {
            signs: vec![Sign::Minus; n],
        }
    }

    /// `S^(j)`: chart `j` (zero-based) post-change, all others pre-change.
    pub fn unit(n: usize, j: usize) -> Self {
        let mut s = Self::all_minus(n);
        s.signs[j] = Sign::Plus;
        s
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    /// Componentwise `self ≤ other` with `-1 < +1`.
    pub fn le(&self, other: &SignVector) -> bool {
        self.len() == other.len() && self.signs.iter().zip(&other.signs).all(|(a, b)| a <= b)
    }
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, xtol: f64) -> f64 {
    // requires f(lo) < 0 < f(hi) or the reverse
    let increasing = f(lo) < 0.0;
    while hi - lo > xtol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == increasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn newton<F, D>(f: F, df: D, mut x: f64, lo: f64, hi: f64) -> f64
where
    F: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    for _ in 0..50 {
        let d = df(x);
        if d == 0.0 {
            break;
        }
        let step = f(x) / d;
        let next = (x - step).clamp(lo, hi);
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// The positive root of `tanh ω = 2εω`, with `δ = 1/(2ε) - ω` kept to full
/// relative precision (it is of order `e^{-1/ε}/ε`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperbolicRoot {
    pub omega: f64,
    pub deficit: f64,
}

pub fn hyperbolic_root(eps: f64) -> Result<HyperbolicRoot> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::NoPositiveRoot(eps));
    }
    let k = 0.5 / eps;
    let f = |w: f64| w.tanh() - w / k;
    let df = |w: f64| 1.0 / w.cosh().powi(2) - 1.0 / k;
    let hi = k;
    let mut lo = 0.5 * k;
    while f(lo) <= 0.0 {
        lo *= 0.5;
        if lo < 1e-300 {
            return Err(Error::RootFinding(format!("no bracket for tanh root at eps = {eps}")));
        }
    }
    let w = bisect(f, lo, hi, 1e-8);
    let w = newton(f, df, w, lo, hi);
    if k >= 2.0 {
        // δ = 2k / (1 + e^{2(k - δ)}) is a strong contraction here
        let mut d = k - w;
        for _ in 0..100 {
            let next = 2.0 * k / (1.0 + (2.0 * (k - d)).exp());
            if next == d {
                break;
            }
            d = next;
        }
        Ok(HyperbolicRoot {
            omega: k - d,
            deficit: d,
        })
    } else {
        Ok(HyperbolicRoot {
            omega: w,
            deficit: k - w,
        })
    }
}

/// `ω` with `tanh ω = 2εω`, for `0 < ε < 1/2`.
pub fn solve_omega(eps: f64) -> Result<f64> {
    hyperbolic_root(eps).map(|r| r.omega)
}

pub fn hyperbolic_residual(eps: f64, omega: f64) -> f64 {
    (omega.tanh() - 2.0 * eps * omega).abs()
}

/// `ω - 1/(2ε) + e^{-1/ε}/ε`, the error of the one-step Newton estimate of
/// the hyperbolic root, evaluated without cancellation.
pub fn newton_gap(eps: f64) -> Result<f64> {
    let r = hyperbolic_root(eps)?;
    let k = 0.5 / eps;
    let d = r.deficit;
    if k >= 2.0 {
        let e = (-2.0 * (k - d)).exp();
        Ok(-2.0 * k * (-2.0 * k).exp() * ((2.0 * d).exp_m1() - e) / (1.0 + e))
    } else {
        Ok(-d + 2.0 * k * (-2.0 * k).exp())
    }
}

/// The bracket holding the `n`-th oscillatory root (`n ≥ 1`).
pub fn oscillatory_bracket(sign: Sign, n: usize) -> (f64, f64) {
    let c = n as f64 * PI;
    match sign {
        Sign::Minus => (c, c + FRAC_PI_2),
        Sign::Plus => (c - FRAC_PI_2, c),
    }
}

/// The `n`-th root (`n ≥ 1`) of `tan ω = 2εω` (`Minus`) or `tan ω = -2εω`
/// (`Plus`) inside [`oscillatory_bracket`].
pub fn oscillatory_root(sign: Sign, eps: f64, n: usize) -> f64 {
    let c = n as f64 * PI;
    let two_eps = 2.0 * eps;
    // ω = nπ + θ with θ = ±atan(2εω)
    let s = match sign {
        Sign::Minus => -1.0,
        Sign::Plus => 1.0,
    };
    let phi = |t: f64| t + s * (two_eps * (c + t)).atan();
    let dphi = |t: f64| {
        let x = two_eps * (c + t);
        1.0 + s * two_eps / (1.0 + x * x)
    };
    let (lo, hi) = match sign {
        Sign::Minus => (0.0, FRAC_PI_2),
        Sign::Plus => (-FRAC_PI_2, 0.0),
    };
    let t = bisect(phi, lo, hi, 1e-8);
    let t = newton(phi, dphi, t, lo, hi);
    c + t
}

pub fn solve_oscillatory_roots(sign: Sign, eps: f64, n_max: usize) -> Vec<f64> {
    (1..=n_max).map(|n| oscillatory_root(sign, eps, n)).collect()
}

/// Angular residual `|sin(ω ∓ atan(2εω))|` of an oscillatory root; equal to
/// `|tan ω ∓ 2εω|` scaled by `cos ω cos(atan 2εω)`, and well conditioned
/// near the poles of `tan`.
pub fn oscillatory_residual(sign: Sign, eps: f64, omega: f64) -> f64 {
    let x = 2.0 * eps * omega;
    let r = match sign {
        Sign::Minus => omega.sin() - x * omega.cos(),
        Sign::Plus => omega.sin() + x * omega.cos(),
    };
    r.abs() / (1.0 + x * x).sqrt()
}

/// Whether a kernel value came from the series or from simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    Series,
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEval {
    pub value: f64,
    /// Oscillatory terms summed.
    pub n_terms: usize,
    /// Certified bound on the dropped terms (or `3·stderr` for the oracle).
    pub tail_bound: f64,
    /// Floating-point error estimate of the summed terms.
    pub rounding: f64,
    /// The value was set to 1 below the series edge time.
    pub edge: bool,
    pub method: KernelMethod,
}

impl KernelEval {
    pub fn error_bound(&self) -> f64 {
        self.tail_bound + self.rounding
    }
}

const PRECOMPUTED_ROOTS: usize = 64;
const MIN_TERMS: usize = 8;
const MAX_TERMS: usize = 200_000;

#[derive(Debug, Clone, Copy)]
struct Term {
    log_abs: f64,
    sign: f64,
    rate: f64,
}

/// Precomputed expansion of `K_{S,ε}(·, 0)` for `0 < ε < 1/2`.
#[derive(Debug, Clone)]
pub struct KernelSeries {
    sign: Sign,
    eps: f64,
    hyperbolic: Option<HyperbolicRoot>,
    lead: Option<Term>,
    roots: Vec<f64>,
    terms: Vec<Term>,
    edge: f64,
}

impl KernelSeries {
    pub fn new(sign: Sign, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(Error::Precondition(format!(
                "series kernels need 0 < eps < 1/2, got {eps}"
            )));
        }
        if 0.5 / eps > 700.0 {
            return Err(Error::Precondition(format!(
                "eps = {eps} is below the supported range (threshold above 1400)"
            )));
        }
        let (hyperbolic, lead) = match sign {
            Sign::Minus => {
                let r = hyperbolic_root(eps)?;
                let w = r.omega;
                let e2 = (-2.0 * w).exp();
                let denom = -(-4.0 * w).exp_m1() - 4.0 * w * e2;
                let log_a0 = -r.deficit + 3.0 * (-(-2.0 * w).exp_m1()).ln() - denom.ln();
                let k = 0.5 / eps;
                let rate = eps * r.deficit * (2.0 * k - r.deficit);
                (
                    Some(r),
                    Some(Term {
                        log_abs: log_a0,
                        sign: 1.0,
                        rate,
                    }),
                )
            }
            Sign::Plus => (None, None),
        };
        let roots = solve_oscillatory_roots(sign, eps, PRECOMPUTED_ROOTS);
        let terms = roots.iter().map(|&w| Self::term(sign, eps, w)).collect();
        // 1 - K(s) ≤ 4 Φ̄((1 - s)/√(2εs)) by comparison with a drift-(+1)
        // reflected motion; solve (1 - s)/√(2εs) = EDGE_Z for s
        let b = EDGE_Z * (2.0 * eps).sqrt();
        let x = 0.5 * ((b * b + 4.0).sqrt() - b);
        Ok(KernelSeries {
            sign,
            eps,
            hyperbolic,
            lead,
            roots,
            terms,
            edge: x * x,
        })
    }

    fn term(sign: Sign, eps: f64, w: f64) -> Term {
        let k = 0.5 / eps;
        let e2w2 = 4.0 * eps * eps * w * w;
        let (amp, shift) = match sign {
            Sign::Minus => (2.0 * e2w2 / (e2w2 + 1.0 - 2.0 * eps), -k),
            Sign::Plus => (2.0 * e2w2 / (e2w2 + 1.0 + 2.0 * eps), k),
        };
        let sw = w.sin();
        Term {
            log_abs: amp.ln() + shift + sw.abs().ln() - w.ln(),
            sign: sw.signum(),
            rate: eps * w * w + 0.5 * k,
        }
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Hyperbolic root data (drift `-1` only).
    pub fn hyperbolic(&self) -> Option<HyperbolicRoot> {
        self.hyperbolic
    }

    /// Precomputed oscillatory roots `ω_1, ω_2, …`.
    pub fn roots(&self) -> &[f64] {
        &self.roots
    }

    /// Coefficients of the precomputed oscillatory terms.
    pub fn coeffs(&self) -> Vec<f64> {
        self.terms.iter().map(|t| t.sign * t.log_abs.exp()).collect()
    }

    /// Times at or below this are answered with `K = 1` (error ≤ 3.8e-17).
    pub fn edge_time(&self) -> f64 {
        self.edge
    }

    fn oscillatory_term(&self, n: usize) -> Term {
        match self.terms.get(n - 1) {
            Some(t) => *t,
            None => Self::term(self.sign, self.eps, oscillatory_root(self.sign, self.eps, n)),
        }
    }

    fn log_prefactor(&self, s: f64) -> f64 {
        let k = 0.5 / self.eps;
        let shift = match self.sign {
            Sign::Minus => -k,
            Sign::Plus => k,
        };
        LN_2 + shift - 0.5 * k * s
    }

    /// Bound on the oscillatory terms with index above `n` at time `s > 0`.
    pub fn tail_bound(&self, n: usize, s: f64) -> f64 {
        let a = self.eps * PI * PI * s;
        let m = match self.sign {
            Sign::Minus => n as f64 + 1.0,
            Sign::Plus => n as f64 + 0.5,
        };
        (self.log_prefactor(s) - a * m * m).exp() / (m * PI * -(-2.0 * a * m).exp_m1())
    }

    /// Slowest mode `(coefficient, rate)`: the hyperbolic mode for drift `-1`,
    /// the first oscillatory mode for `+1`.
    pub fn leading_mode(&self) -> (f64, f64) {
        let t = self.lead.unwrap_or_else(|| self.oscillatory_term(1));
        (t.sign * t.log_abs.exp(), t.rate)
    }

    /// Bound `R(s)` on `|K(s) - leading(s)|`, and a rate `ρ` such that
    /// `R(s') ≤ R(s) e^{-ρ (s' - s)}` for `s' ≥ s`.
    pub fn remainder_bound(&self, s: f64) -> (f64, f64) {
        let used = match self.sign {
            Sign::Minus => 0,
            Sign::Plus => 1,
        };
        let m = match self.sign {
            Sign::Minus => 1.0,
            Sign::Plus => 1.5,
        };
        let rate = 0.25 / self.eps + self.eps * PI * PI * m * m;
        (self.tail_bound(used, s), rate)
    }

    /// `K(s, 0)` with the dropped terms bounded by `tol`.
    pub fn eval(&self, s: f64, tol: f64) -> Result<KernelEval> {
        precondition(s >= 0.0 && s.is_finite(), || {
            format!("kernel time {s} must be finite and ≥ 0")
        })?;
        precondition(tol > 0.0, || format!("kernel tolerance {tol} must be positive"))?;
        if s <= self.edge {
            return Ok(KernelEval {
                value: 1.0,
                n_terms: 0,
                tail_bound: EDGE_MASS,
                rounding: 0.0,
                edge: true,
                method: KernelMethod::Series,
            });
        }
        let mut n = MIN_TERMS;
        let mut tail = self.tail_bound(n, s);
        while tail > tol && n < MAX_TERMS {
            n += 1;
            tail = self.tail_bound(n, s);
        }
        let mut sum = 0.0;
        let mut rounding = 0.0;
        let mut add = |t: Term| {
            let arg = t.log_abs - t.rate * s;
            let v = arg.exp();
            sum += t.sign * v;
            rounding += v * (4.0 + arg.abs() + n as f64);
        };
        if let Some(t) = self.lead {
            add(t);
        }
        for j in 1..=n {
            add(self.oscillatory_term(j));
        }
        Ok(KernelEval {
            value: sum.clamp(0.0, 1.0),
            n_terms: n,
            tail_bound: tail,
            rounding: rounding * f64::EPSILON,
            edge: false,
            method: KernelMethod::Series,
        })
    }
}

/// Survival kernel at any `ε > 0`: the series for `ε < 1/2`, the
/// reflected-motion simulation otherwise.
pub fn eval_kernel(sign: Sign, eps: f64, t: f64, tol: f64) -> Result<KernelEval> {
    precondition(eps > 0.0 && eps.is_finite(), || format!("eps = {eps} must be positive"))?;
    precondition(tol > 0.0, || format!("kernel tolerance {tol} must be positive"))?;
    if eps < 0.5 {
        KernelSeries::new(sign, eps)?.eval(t, tol)
    } else {
        let n_paths = ((2.25 / (tol * tol)).ceil() as usize).clamp(10_000, 200_000);
        let (p, se) = crate::oracles::reflected::survival_mc(sign, eps, t, n_paths, 0)?;
        Ok(KernelEval {
            value: p,
            n_terms: 0,
            tail_bound: 3.0 * se,
            rounding: 0.0,
            edge: false,
            method: KernelMethod::Oracle,
        })
    }
}

pub fn eval_kminus(eps: f64, t: f64, tol: f64) -> Result<KernelEval> {
    eval_kernel(Sign::Minus, eps, t, tol)
}

pub fn eval_kplus(eps: f64, t: f64, tol: f64) -> Result<KernelEval> {
    eval_kernel(Sign::Plus, eps, t, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    // Independent oracle: plain bisection on the cross-multiplied equations.
    fn bisect_oracle<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> f64 {
        let flo = f(lo);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if (f(mid) > 0.0) == (flo > 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn omega_matches_bisection_oracle() {
        for &eps in &[0.45, 0.4, 0.25, 0.1, 0.05] {
            let w = solve_omega(eps).unwrap();
            let oracle = bisect_oracle(|w: f64| 2.0 * eps * w - w.tanh(), 1e-3, 0.5 / eps);
            assert!(
                (w - oracle).abs() < 1e-12 * oracle.max(1.0),
                "eps {eps}: {w} vs {oracle}"
            );
            assert!(hyperbolic_residual(eps, w) < 1e-12);
        }
        assert!((solve_omega(0.1).unwrap() - 4.999_545_608_576).abs() < 1e-11);
        assert!((solve_omega(0.4).unwrap() - 0.888_014_729_36).abs() < 1e-10);
    }

    #[test]
    fn omega_rejects_degenerate_eps() {
        assert!(matches!(solve_omega(0.5), Err(Error::NoPositiveRoot(_))));
        assert!(matches!(solve_omega(0.7), Err(Error::NoPositiveRoot(_))));
        assert!(solve_omega(0.0).is_err());
    }

    #[test]
    fn deficit_is_accurate_when_tiny() {
        // δ = 2k/(1 + e^{2(k-δ)}) ≈ 2k e^{-2k} for k = 10
        let r = hyperbolic_root(0.05).unwrap();
        let approx = 20.0 * (-20.0f64).exp();
        assert!((r.deficit / approx - 1.0).abs() < 1e-6);
        let g = newton_gap(0.05).unwrap();
        // leading behaviour -(2 - ε)/ε² e^{-2/ε}
        let lead = -(2.0 - 0.05) / 0.0025 * (-40.0f64).exp();
        assert!((g / lead - 1.0).abs() < 0.05, "{g} vs {lead}");
    }

    #[test]
    fn oscillatory_roots_match_oracle_and_brackets() {
        for &eps in &[0.4, 0.2, 0.01] {
            for sign in [Sign::Minus, Sign::Plus] {
                let roots = solve_oscillatory_roots(sign, eps, 12);
                for (i, &w) in roots.iter().enumerate() {
                    let (lo, hi) = oscillatory_bracket(sign, i + 1);
                    assert!(w >= lo && w <= hi);
                    let s = sign.value();
                    let oracle = bisect_oracle(|w: f64| w.sin() + s * 2.0 * eps * w * w.cos(), lo + 1e-15, hi - 1e-15);
                    assert!((w - oracle).abs() < 1e-12 * w, "{sign:?} {eps} {i}: {w} vs {oracle}");
                    assert!(oscillatory_residual(sign, eps, w) < 1e-12);
                }
            }
        }
        let w = oscillatory_root(Sign::Minus, 0.2, 1);
        assert!(((w.tan() - 0.4 * w) / (1.0 + w.tan().powi(2))).abs() < 1e-12);
    }

    #[test]
    fn small_eps_roots_approach_asymptote() {
        let w3 = oscillatory_root(Sign::Minus, 0.01, 3);
        let theta = w3 - 3.0 * PI;
        assert!(theta < FRAC_PI_2);
        assert!((theta - (0.02 * 3.0 * PI).atan()).abs() < 0.01);
    }

    #[test]
    fn kernel_starts_at_one() {
        for sign in [Sign::Minus, Sign::Plus] {
            for &eps in &[0.4, 0.2, 0.1] {
                let k = KernelSeries::new(sign, eps).unwrap();
                let just_past = k.eval(k.edge_time() * 1.0001, 1e-14).unwrap();
                assert!((just_past.value - 1.0).abs() < 1e-12, "{sign:?} {eps}: {just_past:?}");
                assert!(k.eval(0.0, 1e-10).unwrap().edge);
            }
        }
    }

    #[test]
    fn kernel_bounded_and_decreasing() {
        for sign in [Sign::Minus, Sign::Plus] {
            for &eps in &[0.45, 0.3, 0.1, 0.05] {
                let k = KernelSeries::new(sign, eps).unwrap();
                let mut prev = 1.0;
                for i in 0..400 {
                    let s = 0.01 * i as f64 * (1.0 + i as f64 * 0.05);
                    let v = k.eval(s, 1e-13).unwrap().value;
                    assert!((0.0..=1.0).contains(&v));
                    assert!(v <= prev + 1e-13, "{sign:?} eps {eps} s {s}: {v} > {prev}");
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn a0_closed_forms_agree() {
        // A0 = e^{-k} sinh³ω / (sinh(2ω)/4 - ω/2)
        for &(eps, expect) in &[
            (0.4, 1.078_898_217_66),
            (0.2, 1.016_485_573_67),
            (0.1, 1.000_318_489_34),
        ] {
            let k = KernelSeries::new(Sign::Minus, eps).unwrap();
            let w = k.hyperbolic().unwrap().omega;
            let direct = (-0.5 / eps).exp() * w.sinh().powi(3) / ((2.0 * w).sinh() / 4.0 - w / 2.0);
            let (a0, _) = k.leading_mode();
            assert!((a0 - direct).abs() < 1e-12);
            assert!((a0 - expect).abs() < 1e-10);
        }
    }

    #[test]
    fn tail_bound_dominates_dropped_terms() {
        for sign in [Sign::Minus, Sign::Plus] {
            let k = KernelSeries::new(sign, 0.2).unwrap();
            for &s in &[0.05, 0.3, 2.0] {
                let full = k.eval(s, 1e-16).unwrap();
                for n in [8, 12, 20] {
                    let mut partial = 0.0;
                    if let Some(t) = k.lead {
                        partial += t.log_abs.exp() * (-t.rate * s).exp();
                    }
                    for j in 1..=n {
                        let t = k.oscillatory_term(j);
                        partial += t.sign * (t.log_abs - t.rate * s).exp();
                    }
                    let dropped = (full.value - partial).abs();
                    assert!(dropped <= k.tail_bound(n, s) + 1e-15);
                }
            }
        }
    }

    #[test]
    fn remainder_bound_covers_non_leading_modes() {
        for sign in [Sign::Minus, Sign::Plus] {
            let k = KernelSeries::new(sign, 0.15).unwrap();
            let (c, r) = k.leading_mode();
            for &s in &[0.5, 1.0, 4.0] {
                let v = k.eval(s, 1e-16).unwrap().value;
                let (bound, _) = k.remainder_bound(s);
                assert!((v - c * (-r * s).exp()).abs() <= bound + 1e-15);
            }
        }
    }

    #[test]
    fn signs_and_vectors() {
        let s = SignVector::unit(3, 1);
        assert_eq!(s.signs(), &[Sign::Minus, Sign::Plus, Sign::Minus]);
        assert!(SignVector::all_minus(3).le(&s));
        assert!(!s.le(&SignVector::all_minus(3)));
        assert!(SignVector::from_ints(&[1, 0]).is_err());
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, "[-1,1,-1]");
        assert_eq!(serde_json::from_str::<SignVector>(&json).unwrap(), s);
    }
}
