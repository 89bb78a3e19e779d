//! Small closed forms shared across modules.

/// `g(v) = e^v - v - 1`, the one-sensor CUSUM delay / false-alarm function.
///
/// `g(h)` is the expected pre-change energy before a false alarm at threshold
/// `h`, and `g(-h)` the expected post-change energy until detection.
pub fn g(v: f64) -> f64 {
    if v.abs() < 0.1 {
        // Taylor series; exp_m1(v) - v cancels for small v
        let mut term = 0.5 * v * v;
        let mut sum = term;
        for k in 3..14 {
            term *= v / k as f64;
            sum += term;
        }
        sum
    } else {
        v.exp_m1() - v
    }
}

/// Upper bound on `4 * P(N(0,1) > 8.5)`, the probability mass ignored when a
/// survival kernel is replaced by 1 near the origin.
pub const EDGE_MASS: f64 = 3.8e-17;

/// Standard-normal quantile used with [`EDGE_MASS`].
pub const EDGE_Z: f64 = 8.5;
