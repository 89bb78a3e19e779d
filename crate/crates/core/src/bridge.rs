//! Brownian-bridge helpers for exact per-step barrier handling.
//!
//! Given the endpoints of one Gaussian step, these answer whether the
//! continuous path touched a level inside the step, and when.

use rand::Rng;
use rand_distr::{Distribution, InverseGaussian, StandardNormal};

/// Probabilities below `exp(LOG_NEGLIGIBLE)` are treated as zero and no
/// uniform is drawn for them.
pub const LOG_NEGLIGIBLE: f64 = -40.0;

/// Log-probability that a bridge from `a` to `b` with total variance `var`
/// reaches `level` from below. Zero when an endpoint is already at or above it.
pub fn log_up_crossing(a: f64, b: f64, level: f64, var: f64) -> f64 {
    if a >= level || b >= level {
        0.0
    } else {
        -2.0 * (level - a) * (level - b) / var
    }
}

/// Log-probability that a bridge from `a` to `b` dips to `level` from above.
pub fn log_down_crossing(a: f64, b: f64, level: f64, var: f64) -> f64 {
    log_up_crossing(-a, -b, -level, var)
}

/// Minimum of a bridge from `a` to `b`, by inversion of its distribution
/// function at `u` in (0, 1]. Smaller `u` gives a deeper minimum.
pub fn bridge_min(a: f64, b: f64, var: f64, u: f64) -> f64 {
    let d = b - a;
    0.5 * (a + b - (d * d - 2.0 * var * u.ln()).sqrt())
}

/// First time a bridge from `a` to `b` over `[0, dt]` hits `level`,
/// conditioned on hitting it. `var_rate` is the variance per unit time.
///
/// With `x = tau / (dt - tau)` the conditional density is inverse Gaussian
/// with mean `|level - a| / |level - b|` and shape `(level - a)^2 / (var_rate dt)`.
pub fn bridge_passage_time<R: Rng + ?Sized>(a: f64, b: f64, level: f64, var_rate: f64, dt: f64, rng: &mut R) -> f64 {
    let alpha = (level - a).abs();
    let beta = (level - b).abs();
    if alpha == 0.0 {
        return 0.0;
    }
    let shape = alpha * alpha / (var_rate * dt);
    let x = if beta <= 1e-12 * alpha {
        // Levy limit of an infinite-mean inverse Gaussian
        let z: f64 = rng.sample(StandardNormal);
        shape / (z * z)
    } else {
        match InverseGaussian::new(alpha / beta, shape) {
            Ok(ig) => ig.sample(rng),
            Err(_) => alpha / beta,
        }
    };
    if x.is_infinite() {
        dt
    } else {
        dt * x / (1.0 + x)
    }
}
