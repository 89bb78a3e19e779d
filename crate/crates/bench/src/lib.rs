//! Fixtures shared by the benchmarks.

use qdetect::{ChangePointVector, SensorSystemSpec, SignVector, SignalStrengths, ThresholdVector};

/// A two-sensor constant-drift system with `c = (1, c2)`.
pub fn two_sensor_system(c2: f64) -> SensorSystemSpec {
    SensorSystemSpec::constant(vec![1.0, c2], 1.0).expect("valid strengths")
}

/// `(sign, thresholds, strengths)` for the all-pre-change regime with a
/// common threshold `h` on `n` unit-strength sensors.
pub fn false_alarm_case(n: usize, h: f64) -> (SignVector, ThresholdVector, SignalStrengths) {
    (
        SignVector::all_minus(n),
        ThresholdVector::uniform(n, h).expect("positive threshold"),
        SignalStrengths::ones(n),
    )
}

/// Worst-case delay scenario: sensor `j` changes at time zero.
pub fn worst_case(n: usize, j: usize) -> ChangePointVector {
    ChangePointVector::only(n, j)
}
