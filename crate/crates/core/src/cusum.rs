//! CUSUM statistics `y_i = u_i - m_i` and the multi-chart stopping rule
//! `T = inf{t : max_i y_i(t)/h_i ≥ 1}`.
//!
//! `u_i` accumulates the log-likelihood ratio `α_i dZ_i - ½ α_i² dt` with the
//! model drift evaluated on the observed path, and `m_i` is its running
//! minimum (stored explicitly rather than using the reflected recursion).

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bridge::{bridge_min, log_down_crossing, log_up_crossing, LOG_NEGLIGIBLE};
use crate::error::{precondition, Error, Result};
use crate::rng::{stream, Domain};
use crate::sde_sim::{PathBundle, SensorSystemSpec};

/// Thresholds `h_i > 0`, in nats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ThresholdVector {
    hs: Vec<f64>,
}

impl ThresholdVector {
    pub fn new(hs: Vec<f64>) -> Result<Self> {
        precondition(!hs.is_empty(), || "no thresholds given".into())?;
        for (i, &h) in hs.iter().enumerate() {
            precondition(h > 0.0 && h.is_finite(), || {
                format!("h_{} = {h} must be positive", i + 1)
            })?;
        }
        Ok(ThresholdVector { hs })
    }

    pub fn uniform(n: usize, h: f64) -> Result<Self> {
        Self::new(vec![h; n])
    }

    pub fn len(&self) -> usize {
        self.hs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.hs
    }
}

impl TryFrom<Vec<f64>> for ThresholdVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ThresholdVector> for Vec<f64> {
    fn from(h: ThresholdVector) -> Vec<f64> {
        h.hs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CusumState {
    pub u: Vec<f64>,
    pub m: Vec<f64>,
    pub y: Vec<f64>,
    pub t: f64,
}

impl CusumState {
    pub fn new(n: usize) -> Self {
        CusumState {
            u: vec![0.0; n],
            m: vec![0.0; n],
            y: vec![0.0; n],
            t: 0.0,
        }
    }

    /// Applies one step; `increments[i] = (dZ_i, α_i)`.
    pub fn apply(&mut self, increments: &[(f64, f64)], dt: f64) -> Result<()> {
        if increments.len() != self.u.len() {
            return Err(Error::Dimension(format!(
                "{} increments for {} charts",
                increments.len(),
                self.u.len()
            )));
        }
        for (i, &(dz, a)) in increments.iter().enumerate() {
            let u = self.u[i] + a * dz - 0.5 * a * a * dt;
            if !u.is_finite() {
                return Err(Error::NumericOverflow {
                    sensor: i + 1,
                    t: self.t + dt,
                });
            }
            self.u[i] = u;
            self.m[i] = self.m[i].min(u);
            self.y[i] = u - self.m[i];
        }
        self.t += dt;
        Ok(())
    }
}

/// Functional form of [`CusumState::apply`].
pub fn update(state: &CusumState, increments: &[(f64, f64)], dt: f64) -> Result<CusumState> {
    let mut s = state.clone();
    s.apply(increments, dt)?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StopReport {
    pub stopped: bool,
    pub stop_time: Option<f64>,
    /// Zero-based index of the chart that fired (lowest index on ties).
    pub firing_sensor: Option<usize>,
    pub y_at_stop: Vec<f64>,
    /// Grid steps consumed.
    pub steps: usize,
    /// The crossing was inferred from the bridge between two samples.
    #[serde(default)]
    pub crossed_between_samples: bool,
}

/// How threshold crossings are detected between observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Monitoring {
    /// Only at grid times.
    #[default]
    Grid,
    /// Also between grid times: the running minimum and the crossing event are
    /// drawn from the Brownian bridge of `u_i` over each step. Removes the
    /// `O(√dt)` discrete-monitoring bias of [`Monitoring::Grid`].
    Bridge,
}

/// Online detector fed with observation increments.
pub struct StreamingDetector {
    spec: SensorSystemSpec,
    hbar: ThresholdVector,
    mode: Monitoring,
    state: CusumState,
    z: Vec<f64>,
    history: Option<Vec<Vec<f64>>>,
    alpha: Vec<f64>,
    incs: Vec<(f64, f64)>,
    rngs: Vec<ChaCha8Rng>,
    u0: Vec<f64>,
    m0: Vec<f64>,
    steps: usize,
    done: bool,
}

impl StreamingDetector {
    /// `seed`/`path_index` key the bridge randomness; unused on the grid.
    pub fn new(
        spec: &SensorSystemSpec,
        hbar: &ThresholdVector,
        mode: Monitoring,
        seed: u64,
        path_index: u64,
    ) -> Result<Self> {
        let n = spec.n();
        if hbar.len() != n {
            return Err(Error::Dimension(format!("{} thresholds for {n} sensors", hbar.len())));
        }
        Ok(StreamingDetector {
            spec: spec.clone(),
            hbar: hbar.clone(),
            mode,
            state: CusumState::new(n),
            z: vec![0.0; n],
            history: spec.needs_history().then(|| vec![vec![0.0]; n]),
            alpha: vec![0.0; n],
            incs: vec![(0.0, 0.0); n],
            rngs: match mode {
                Monitoring::Grid => Vec::new(),
                Monitoring::Bridge => (0..n)
                    .map(|i| stream(seed, Domain::Detector, path_index, i as u64))
                    .collect(),
            },
            u0: vec![0.0; n],
            m0: vec![0.0; n],
            steps: 0,
            done: false,
        })
    }

    pub fn state(&self) -> &CusumState {
        &self.state
    }

    /// Model drifts used on the last step.
    pub fn last_drift(&self) -> &[f64] {
        &self.alpha
    }

    pub fn is_stopped(&self) -> bool {
        self.done
    }

    /// Consumes one observation step `(dt, dZ)`. Returns the stop report the
    /// first time the rule fires; later calls are errors.
    pub fn feed(&mut self, dt: f64, dz: &[f64]) -> Result<Option<StopReport>> {
        precondition(!self.done, || "detector already stopped".into())?;
        precondition(dt > 0.0, || format!("dt = {dt} must be positive"))?;
        let n = self.z.len();
        if dz.len() != n {
            return Err(Error::Dimension(format!("{} increments for {n} sensors", dz.len())));
        }
        let empty: [Vec<f64>; 0] = [];
        let history: &[Vec<f64>] = self.history.as_deref().unwrap_or(&empty);
        for (i, &d) in dz.iter().enumerate() {
            self.alpha[i] = self.spec.model_drift(self.state.t, &self.z, history, i);
            self.incs[i] = (d, self.alpha[i]);
        }
        self.u0.copy_from_slice(&self.state.u);
        self.m0.copy_from_slice(&self.state.m);
        self.state.apply(&self.incs, dt)?;
        self.steps += 1;
        for (z, d) in self.z.iter_mut().zip(dz) {
            *z += d;
        }
        if let Some(h) = self.history.as_mut() {
            for (hist, &z) in h.iter_mut().zip(&self.z) {
                hist.push(z);
            }
        }

        let hs = self.hbar.as_slice();
        let mut fired = None;
        let mut between = false;
        let (u0, m0) = (&self.u0, &self.m0);
        match self.mode {
            Monitoring::Grid => fired = (0..n).find(|&i| self.state.y[i] >= hs[i]),
            Monitoring::Bridge => {
                for i in 0..n {
                    let a = self.alpha[i];
                    let var = a * a * dt;
                    let u1 = self.state.u[i];
                    let rng = &mut self.rngs[i];
                    if var > 0.0 {
                        // the running minimum may dip inside the step
                        let lp = log_down_crossing(u0[i], u1, m0[i], var);
                        if lp > LOG_NEGLIGIBLE {
                            let w = 1.0 - rng.random::<f64>();
                            if w.ln() < lp {
                                let m = bridge_min(u0[i], u1, var, w).min(m0[i]);
                                self.state.m[i] = m;
                                self.state.y[i] = u1 - m;
                            }
                        }
                    }
                    if fired.is_some() {
                        continue;
                    }
                    if self.state.y[i] >= hs[i] {
                        fired = Some(i);
                    } else if var > 0.0 && self.state.m[i] == m0[i] {
                        let lq = log_up_crossing(u0[i], u1, m0[i] + hs[i], var);
                        if lq > LOG_NEGLIGIBLE && (1.0 - rng.random::<f64>()).ln() < lq {
                            fired = Some(i);
                            between = true;
                        }
                    }
                }
            }
        }
        Ok(fired.map(|i| {
            self.done = true;
            StopReport {
                stopped: true,
                stop_time: Some(self.state.t),
                firing_sensor: Some(i),
                y_at_stop: self.state.y.clone(),
                steps: self.steps,
                crossed_between_samples: between,
            }
        }))
    }

    /// Report for a detector that never fired.
    pub fn unstopped_report(&self) -> StopReport {
        StopReport {
            stopped: false,
            stop_time: None,
            firing_sensor: None,
            y_at_stop: self.state.y.clone(),
            steps: self.steps,
            crossed_between_samples: false,
        }
    }
}

fn check_path(path: &PathBundle, n: usize) -> Result<()> {
    if path.n_sensors() != n {
        return Err(Error::Dimension(format!(
            "path has {} sensors, expected {n}",
            path.n_sensors()
        )));
    }
    Ok(())
}

fn run_on_path(path: &PathBundle, charts: &[usize], hs: &[f64]) -> Result<StopReport> {
    let n = charts.len();
    let mut state = CusumState::new(n);
    let mut incs = vec![(0.0, 0.0); n];
    if let Some(i) = (0..n).find(|&i| state.y[i] >= hs[i]) {
        return Ok(StopReport {
            stopped: true,
            stop_time: Some(0.0),
            firing_sensor: Some(i),
            y_at_stop: state.y,
            steps: 0,
            crossed_between_samples: false,
        });
    }
    for k in 1..path.n_points() {
        for (slot, &c) in incs.iter_mut().zip(charts) {
            let s = &path.samples[c];
            *slot = (s[k] - s[k - 1], path.model_drift_samples[c][k]);
        }
        state.apply(&incs, path.dt)?;
        if let Some(i) = (0..n).find(|&i| state.y[i] >= hs[i]) {
            return Ok(StopReport {
                stopped: true,
                stop_time: Some(k as f64 * path.dt),
                firing_sensor: Some(i),
                y_at_stop: state.y,
                steps: k,
                crossed_between_samples: false,
            });
        }
    }
    Ok(StopReport {
        stopped: false,
        stop_time: None,
        firing_sensor: None,
        y_at_stop: state.y,
        steps: path.n_points() - 1,
        crossed_between_samples: false,
    })
}

/// Runs the multi-chart rule over a stored path, checking at grid times.
pub fn run_detector(path: &PathBundle, spec: &SensorSystemSpec, hbar: &ThresholdVector) -> Result<StopReport> {
    let n = spec.n();
    check_path(path, n)?;
    if hbar.len() != n {
        return Err(Error::Dimension(format!("{} thresholds for {n} sensors", hbar.len())));
    }
    let charts: Vec<usize> = (0..n).collect();
    run_on_path(path, &charts, hbar.as_slice())
}

/// One-sensor CUSUM with threshold `nu ≥ 0` on chart `sensor`. The report's
/// `firing_sensor` is `sensor` and `y_at_stop` has one entry.
pub fn single_cusum(path: &PathBundle, sensor: usize, nu: f64) -> Result<StopReport> {
    precondition(sensor < path.n_sensors(), || format!("no sensor {sensor}"))?;
    precondition(nu >= 0.0 && nu.is_finite(), || format!("threshold {nu} must be ≥ 0"))?;
    let mut r = run_on_path(path, &[sensor], &[nu])?;
    r.firing_sensor = r.firing_sensor.map(|_| sensor);
    Ok(r)
}
