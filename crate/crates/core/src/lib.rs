//! Quickest detection of the first change among `N` coupled sensors with the
//! multi-chart CUSUM rule.
//!
//! The crate covers the whole loop: simulating the observation processes
//! ([`sde_sim`]), running the detector ([`cusum`]), evaluating the expected
//! delay and false-alarm energies exactly through survival-kernel series
//! ([`kernel`], [`delay_calc`]), calibrating thresholds against a false-alarm
//! budget ([`calibrate`]), checking everything against brute-force references
//! ([`oracles`]) and running reproducible experiments ([`harness`]).

#![forbid(unsafe_code)]

pub mod bridge;
pub mod calibrate;
pub mod cusum;
pub mod delay_calc;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod oracles;
pub mod quadrature;
pub mod rng;
pub mod sde_sim;
pub mod special;

pub use calibrate::{
    calibrate_asymmetric, calibrate_symmetric, equalizer_residual, solve_g, CalibrationResult, Regime,
};
pub use cusum::{run_detector, single_cusum, CusumState, Monitoring, StopReport, StreamingDetector, ThresholdVector};
pub use delay_calc::{
    expected_delay_mc, expected_delay_mc_with, f_delay_asymptotic, f_false_alarm_asymptotic, f_origin, DelayMcOptions,
    FMethod, FValue,
};
pub use error::{Error, Result};
pub use harness::{run_detection_demo, run_gap_experiment, ExperimentConfig, ExperimentRecord};
pub use kernel::{KernelEval, KernelSeries, Sign, SignVector};
pub use sde_sim::{simulate, ChangePointVector, DriftSpec, PathBundle, SensorSystemSpec, SignalStrengths};
pub use special::g;
