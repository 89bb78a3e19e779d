//! Monte Carlo for reflected drifted Brownian motions with an absorbing level.
//!
//! Each step uses the exact Skorokhod map for the Gaussian increment
//! (`X' = max(x + B, B - min B)`, with the bridge minimum drawn by inversion),
//! so the reflection adds no discretization bias. Passages through the
//! absorbing level inside a step are detected with the bridge crossing
//! probability and timed with an exact inverse-Gaussian draw.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bridge::{bridge_min, bridge_passage_time, log_down_crossing, log_up_crossing, LOG_NEGLIGIBLE};
use crate::cusum::ThresholdVector;
use crate::error::{precondition, Error, Result};
use crate::kernel::{Sign, SignVector};
use crate::rng::{stream, Domain};
use crate::sde_sim::SignalStrengths;
use crate::special::g;

/// Mean and standard error of a Monte Carlo average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
}

impl McEstimate {
    pub fn from_samples(xs: &[f64]) -> McEstimate {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        McEstimate {
            mean,
            stderr: (var / n as f64).sqrt(),
            n_paths: n,
        }
    }
}

/// Reflected at 0, absorbed at `level`.
#[derive(Debug, Clone)]
pub struct ReflectedWalker {
    pub x: f64,
    mu: f64,
    var_rate: f64,
    level: f64,
}

impl ReflectedWalker {
    pub fn new(mu: f64, var_rate: f64, level: f64) -> Self {
        ReflectedWalker {
            x: 0.0,
            mu,
            var_rate,
            level,
        }
    }

    /// Advances by `dt`; returns the offset inside the step at which the
    /// level was first reached, if it was.
    pub fn step<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) -> Option<f64> {
        let var = self.var_rate * dt;
        let z: f64 = rng.sample(StandardNormal);
        let x0 = self.x;
        let free = x0 + self.mu * dt + var.sqrt() * z;
        let mut x1 = free;
        let mut reflected = false;
        let lp = log_down_crossing(x0, free, 0.0, var);
        if lp > LOG_NEGLIGIBLE {
            let u = 1.0 - rng.random::<f64>();
            if u.ln() < lp {
                x1 = free - bridge_min(x0, free, var, u);
                reflected = true;
            }
        }
        self.x = x1;
        let crossed = if x1 >= self.level {
            true
        } else if reflected {
            // touching 0 and the level within one step is negligible for the
            // step sizes used here
            false
        } else {
            let lq = log_up_crossing(x0, x1, self.level, var);
            lq > LOG_NEGLIGIBLE && (1.0 - rng.random::<f64>()).ln() < lq
        };
        crossed.then(|| bridge_passage_time(x0, x1, self.level, self.var_rate, dt, rng))
    }
}

/// `P(no absorption by time s)` for drift `sign`, variance `2ε` per unit
/// time and level 1: the survival kernel `K_{sign,ε}(s, 0)` by simulation.
pub fn survival_mc(sign: Sign, eps: f64, s: f64, n_paths: usize, seed: u64) -> Result<(f64, f64)> {
    precondition(eps > 0.0 && s >= 0.0 && s.is_finite(), || {
        format!("survival simulation needs eps > 0 and finite s ≥ 0 (eps = {eps}, s = {s})")
    })?;
    precondition(n_paths > 0, || "n_paths must be positive".into())?;
    if s == 0.0 {
        return Ok((1.0, 0.0));
    }
    let dt_target = 0.01 / (2.0 * eps);
    let steps = (s / dt_target).ceil().max(1.0) as usize;
    let dt = s / steps as f64;
    let survived: usize = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rng = stream(seed, Domain::Survival, p as u64, 0);
            let mut w = ReflectedWalker::new(sign.value(), 2.0 * eps, 1.0);
            (0..steps).all(|_| w.step(dt, &mut rng).is_none()) as usize
        })
        .sum();
    let p = survived as f64 / n_paths as f64;
    Ok((p, (p * (1.0 - p) / n_paths as f64).sqrt()))
}

/// Default step for [`f_mc_reflected`]: one hundredth of the smallest
/// `c_i² h_i²`, which keeps a single step from spanning the whole interval
/// `[0, h_i]` with any appreciable probability.
pub fn default_dt(hbar: &ThresholdVector, cs: &SignalStrengths) -> f64 {
    hbar.as_slice()
        .iter()
        .zip(cs.squared())
        .map(|(h, c2)| c2 * h * h)
        .fold(f64::INFINITY, f64::min)
        / 100.0
}

/// Expected minimum of the first passage times of independent reflected
/// motions, chart `i` having drift `S_i/c_i²`, diffusion `√2/|c_i|` and
/// level `h_i`. This equals `f_{S,ℏ}` at the origin.
pub fn f_mc_reflected(
    sign: &SignVector,
    hbar: &ThresholdVector,
    cs: &SignalStrengths,
    n_paths: usize,
    dt: Option<f64>,
    seed: u64,
) -> Result<McEstimate> {
    let n = sign.len();
    if hbar.len() != n || cs.len() != n {
        return Err(Error::Dimension(format!(
            "sign has {n} entries, thresholds {}, strengths {}",
            hbar.len(),
            cs.len()
        )));
    }
    precondition(n <= 3, || format!("reflected Monte Carlo is limited to N ≤ 3, got {n}"))?;
    precondition(n_paths >= 1000, || format!("need at least 1000 paths, got {n_paths}"))?;
    let dt = dt.unwrap_or_else(|| default_dt(hbar, cs));
    precondition(dt > 0.0 && dt.is_finite(), || format!("step {dt} must be positive"))?;
    let c2 = cs.squared();
    let hs = hbar.as_slice();
    let horizon = 200.0
        * (0..n)
            .map(|i| c2[i] * g(-sign.signs()[i].value() * hs[i]))
            .fold(f64::INFINITY, f64::min)
        + 100.0 * dt;

    let times: Vec<Option<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let mut rngs: Vec<_> = (0..n)
                .map(|i| stream(seed, Domain::Reflected, p as u64, i as u64))
                .collect();
            let mut walkers: Vec<_> = (0..n)
                .map(|i| ReflectedWalker::new(sign.signs()[i].value() / c2[i], 2.0 / c2[i], hs[i]))
                .collect();
            let mut t = 0.0;
            loop {
                let mut best = f64::INFINITY;
                for (w, rng) in walkers.iter_mut().zip(rngs.iter_mut()) {
                    if let Some(off) = w.step(dt, rng) {
                        best = best.min(t + off);
                    }
                }
                if best.is_finite() {
                    return Some(best);
                }
                t += dt;
                if t > horizon {
                    return None;
                }
            }
        })
        .collect();
    let nonstopping = times.iter().filter(|t| t.is_none()).count();
    if nonstopping > 0 {
        return Err(Error::NonStopping {
            nonstopping,
            total: n_paths,
            horizon,
        });
    }
    let samples: Vec<f64> = times.into_iter().flatten().collect();
    Ok(McEstimate::from_samples(&samples))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(h: f64) -> (ThresholdVector, SignalStrengths) {
        (
            ThresholdVector::new(vec![h]).unwrap(),
            SignalStrengths::new(vec![1.0]).unwrap(),
        )
    }

    #[test]
    fn reflected_paths_stay_nonnegative() {
        let mut rng = stream(1, Domain::Reflected, 0, 0);
        let mut w = ReflectedWalker::new(-1.0, 2.0, 1e9);
        for _ in 0..100_000 {
            w.step(0.01, &mut rng);
            assert!(w.x >= 0.0);
        }
    }

    #[test]
    fn one_dimensional_closed_forms() {
        for (sign, h, expect) in [(Sign::Plus, 2.0, g(-2.0)), (Sign::Minus, 2.0, g(2.0))] {
            let (hb, cs) = one(h);
            let est = f_mc_reflected(&SignVector::new(vec![sign]), &hb, &cs, 20_000, None, 5).unwrap();
            assert!(
                (est.mean - expect).abs() < 3.0 * est.stderr,
                "{sign:?}: {} ± {} vs {expect}",
                est.mean,
                est.stderr
            );
        }
    }

    #[test]
    fn coarse_steps_remain_unbiased() {
        // the exact step makes the estimate insensitive to dt
        let (hb, cs) = one(3.0);
        let s = SignVector::new(vec![Sign::Plus]);
        let est = f_mc_reflected(&s, &hb, &cs, 20_000, Some(0.2), 9).unwrap();
        assert!((est.mean - g(-3.0)).abs() < 3.0 * est.stderr);
    }

    #[test]
    fn survival_is_one_at_zero_and_decreases() {
        assert_eq!(survival_mc(Sign::Plus, 0.2, 0.0, 100, 0).unwrap(), (1.0, 0.0));
        let (a, _) = survival_mc(Sign::Plus, 0.2, 0.5, 4000, 0).unwrap();
        let (b, _) = survival_mc(Sign::Plus, 0.2, 1.5, 4000, 0).unwrap();
        assert!(a > b);
    }

    #[test]
    fn guards() {
        let (hb, cs) = one(2.0);
        let s = SignVector::new(vec![Sign::Plus]);
        assert!(f_mc_reflected(&s, &hb, &cs, 10, None, 0).is_err());
        let s2 = SignVector::all_minus(2);
        assert!(matches!(
            f_mc_reflected(&s2, &hb, &cs, 1000, None, 0),
            Err(Error::Dimension(_))
        ));
    }
}
