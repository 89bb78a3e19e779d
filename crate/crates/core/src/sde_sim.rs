//! Simulation of the coupled observation processes
//! `dZ_i = α_i(t) 1{t > τ_i} dt + dw_i`, `i = 1..N`.
//!
//! Paths are Euler–Maruyama on a uniform grid. Each sensor draws its noise
//! from its own keyed ChaCha stream, so a path is a pure function of
//! `(spec, τ, dt, seed, path index)`.

use std::fmt;
use std::io::{Read, Write};
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{precondition, Error, Result};
use crate::rng::{stream, Domain};

/// Change points `τ_i`; `f64::INFINITY` means the sensor never changes.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangePointVector {
    taus: Vec<f64>,
}

impl ChangePointVector {
    pub fn new(taus: Vec<f64>) -> Result<Self> {
        precondition(!taus.is_empty(), || "change-point vector is empty".into())?;
        for (i, &t) in taus.iter().enumerate() {
            precondition(t >= 0.0, || format!("τ_{} = {t} must be ≥ 0 or infinite", i + 1))?;
        }
        Ok(ChangePointVector { taus })
    }

    /// No change in any of `n` sensors.
    pub fn never(n: usize) -> Self {
        ChangePointVector {
            taus: vec![f64::INFINITY; n],
        }
    }

    /// Sensor `j` (zero-based) changes at time 0, the rest never.
    pub fn only(n: usize, j: usize) -> Self {
        let mut v = Self::never(n);
        v.taus[j] = 0.0;
        v
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.taus
    }

    /// `τ̃ = min_i τ_i`, infinite when no sensor changes.
    pub fn min_finite(&self) -> f64 {
        self.taus.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TauRepr {
    Finite(f64),
    Named(String),
}

impl Serialize for ChangePointVector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let v: Vec<TauRepr> = self
            .taus
            .iter()
            .map(|&t| {
                if t.is_finite() {
                    TauRepr::Finite(t)
                } else {
                    TauRepr::Named("inf".into())
                }
            })
            .collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ChangePointVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = Vec::<TauRepr>::deserialize(d)?;
        let taus = raw
            .into_iter()
            .map(|r| match r {
                TauRepr::Finite(t) => Ok(t),
                TauRepr::Named(s) if matches!(s.as_str(), "inf" | "infinity" | "never") => Ok(f64::INFINITY),
                TauRepr::Named(s) => Err(serde::de::Error::custom(format!("bad change point {s:?}"))),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        ChangePointVector::new(taus).map_err(serde::de::Error::custom)
    }
}

/// Signal strengths `c_i` with `c_1 = 1` and `|c_i|` non-decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SignalStrengths {
    cs: Vec<f64>,
}

impl SignalStrengths {
    pub fn new(cs: Vec<f64>) -> Result<Self> {
        precondition(!cs.is_empty(), || "no signal strengths given".into())?;
        precondition(cs[0] == 1.0, || format!("c_1 must be 1, got {}", cs[0]))?;
        for (i, &c) in cs.iter().enumerate() {
            precondition(c != 0.0 && c.is_finite(), || {
                format!("c_{} = {c} must be finite and nonzero", i + 1)
            })?;
            if i > 0 {
                precondition(c.abs() >= cs[i - 1].abs(), || {
                    format!("|c_i| must be non-decreasing, |c_{}| > |c_{}|", i, i + 1)
                })?;
            }
        }
        Ok(SignalStrengths { cs })
    }

    pub fn ones(n: usize) -> Self {
        SignalStrengths { cs: vec![1.0; n] }
    }

    /// Sorts by `|c|` and returns the permutation applied (`perm[k]` is the
    /// original index of the k-th entry).
    pub fn canonical(cs: &[f64]) -> Result<(Self, Vec<usize>)> {
        let mut perm: Vec<usize> = (0..cs.len()).collect();
        perm.sort_by(|&a, &b| cs[a].abs().total_cmp(&cs[b].abs()));
        let sorted = perm.iter().map(|&i| cs[i]).collect();
        Ok((Self::new(sorted)?, perm))
    }

    pub fn len(&self) -> usize {
        self.cs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cs.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.cs
    }

    pub fn squared(&self) -> Vec<f64> {
        self.cs.iter().map(|c| c * c).collect()
    }

    /// `c_N²`.
    pub fn max_squared(&self) -> f64 {
        let c = self.cs[self.cs.len() - 1];
        c * c
    }

    pub fn all_unit(&self) -> bool {
        self.cs.iter().all(|c| c.abs() == 1.0)
    }
}

impl TryFrom<Vec<f64>> for SignalStrengths {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SignalStrengths> for Vec<f64> {
    fn from(s: SignalStrengths) -> Vec<f64> {
        s.cs
    }
}

/// User drift `α_i(t, history)`; `history[j]` holds sensor `j`'s samples
/// `Z_j(0), …, Z_j(t)` on the simulation grid.
pub type DriftFn = dyn Fn(f64, &[Vec<f64>], usize) -> f64 + Send + Sync;

#[derive(Clone)]
pub struct CustomDrift(pub Arc<DriftFn>);

impl fmt::Debug for CustomDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("CustomDrift(..)")
    }
}

/// Post-change drift family. Drifts are scaled so that `|c_i α_i|` is the
/// same for every sensor.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftSpec {
    /// `α_i = μ / c_i`.
    Constant { mu: f64 },
    /// `α_i = -(r / c_i) Σ_j Z_j(t)`.
    LinearStateSpace { r: f64 },
    #[serde(skip)]
    Custom(CustomDrift),
}

impl DriftSpec {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(f64, &[Vec<f64>], usize) -> f64 + Send + Sync + 'static,
    {
        DriftSpec::Custom(CustomDrift(Arc::new(f)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensorSystemSpec {
    pub cs: SignalStrengths,
    pub drift: DriftSpec,
}

impl SensorSystemSpec {
    pub fn new(cs: SignalStrengths, drift: DriftSpec) -> Result<Self> {
        let spec = SensorSystemSpec { cs, drift };
        spec.validate()?;
        Ok(spec)
    }

    pub fn constant(cs: Vec<f64>, mu: f64) -> Result<Self> {
        Self::new(SignalStrengths::new(cs)?, DriftSpec::Constant { mu })
    }

    pub fn validate(&self) -> Result<()> {
        match self.drift {
            DriftSpec::Constant { mu } => precondition(mu != 0.0 && mu.is_finite(), || {
                format!("constant drift μ = {mu} must be nonzero")
            }),
            DriftSpec::LinearStateSpace { r } => precondition(r > 0.0 && r.is_finite(), || {
                format!("linear drift rate r = {r} must be positive")
            }),
            DriftSpec::Custom(_) => Ok(()),
        }
    }

    pub fn n(&self) -> usize {
        self.cs.len()
    }

    pub fn needs_history(&self) -> bool {
        matches!(self.drift, DriftSpec::Custom(_))
    }

    /// Model drift of sensor `i` at time `t` given the current values `z`
    /// (and, for custom drifts, the full history).
    pub fn model_drift(&self, t: f64, z: &[f64], history: &[Vec<f64>], i: usize) -> f64 {
        let c = self.cs.as_slice()[i];
        match &self.drift {
            DriftSpec::Constant { mu } => mu / c,
            DriftSpec::LinearStateSpace { r } => -(r / c) * z.iter().sum::<f64>(),
            DriftSpec::Custom(f) => (f.0)(t, history, i),
        }
    }

    /// Whether `|c_i α_i|` agrees with `|α_1|` for all sensors.
    pub fn proportional(&self, alphas: &[f64]) -> bool {
        let a1 = alphas[0].abs();
        self.cs
            .as_slice()
            .iter()
            .zip(alphas)
            .all(|(c, a)| ((c * a).abs() - a1).abs() <= 1e-9 * a1.max(1e-300))
    }
}

/// Grid index after which a change at `tau` is active.
pub(crate) fn change_step(tau: f64, dt: f64) -> Option<usize> {
    if !tau.is_finite() {
        return None;
    }
    let r = tau / dt;
    let k = if (r - r.round()).abs() < 1e-9 * r.max(1.0) {
        r.round()
    } else {
        r.ceil()
    };
    Some(k as usize)
}

/// Step-by-step generator for one path.
pub struct PathStream {
    spec: SensorSystemSpec,
    dt: f64,
    sqrt_dt: f64,
    k: usize,
    z: Vec<f64>,
    change: Vec<Option<usize>>,
    rngs: Vec<ChaCha8Rng>,
    history: Option<Vec<Vec<f64>>>,
    realized: Vec<f64>,
    model: Vec<f64>,
    warned: bool,
}

impl PathStream {
    pub fn new(spec: &SensorSystemSpec, taus: &ChangePointVector, dt: f64, seed: u64, path_index: u64) -> Result<Self> {
        spec.validate()?;
        precondition(dt > 0.0 && dt.is_finite(), || format!("dt = {dt} must be positive"))?;
        let n = spec.n();
        if taus.len() != n {
            return Err(Error::Dimension(format!(
                "{} change points for {n} sensors",
                taus.len()
            )));
        }
        Ok(PathStream {
            spec: spec.clone(),
            dt,
            sqrt_dt: dt.sqrt(),
            k: 0,
            z: vec![0.0; n],
            change: taus.as_slice().iter().map(|&t| change_step(t, dt)).collect(),
            rngs: (0..n)
                .map(|i| stream(seed, Domain::Path, path_index, i as u64))
                .collect(),
            history: spec.needs_history().then(|| vec![vec![0.0]; n]),
            realized: vec![0.0; n],
            model: vec![0.0; n],
            warned: false,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn step_index(&self) -> usize {
        self.k
    }

    pub fn t(&self) -> f64 {
        self.k as f64 * self.dt
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    /// Drift applied during the last step.
    pub fn realized_drift(&self) -> &[f64] {
        &self.realized
    }

    /// Model drift evaluated on the path during the last step, whether or
    /// not the change had happened.
    pub fn model_drift(&self) -> &[f64] {
        &self.model
    }

    /// Advances one step, writing the increments into `dz`; returns the new time.
    pub fn step(&mut self, dz: &mut [f64]) -> Result<f64> {
        if dz.len() != self.z.len() {
            return Err(Error::Dimension(format!(
                "{} increments for {} sensors",
                dz.len(),
                self.z.len()
            )));
        }
        let t0 = self.t();
        let k = self.k + 1;
        let empty: [Vec<f64>; 0] = [];
        let history: &[Vec<f64>] = self.history.as_deref().unwrap_or(&empty);
        for i in 0..self.z.len() {
            let a = self.spec.model_drift(t0, &self.z, history, i);
            if !a.is_finite() {
                return Err(Error::DriftBlowup { step: k, sensor: i + 1 });
            }
            self.model[i] = a;
        }
        if self.history.is_some() && !self.warned && !self.spec.proportional(&self.model) {
            self.warned = true;
            log::warn!("custom drift violates |c_i α_i| = |α_1| at t = {t0}: {:?}", self.model);
        }
        for (i, d) in dz.iter_mut().enumerate() {
            let active = self.change[i].is_some_and(|kc| k > kc);
            let a = if active { self.model[i] } else { 0.0 };
            self.realized[i] = a;
            let xi: f64 = self.rngs[i].sample(StandardNormal);
            *d = a * self.dt + self.sqrt_dt * xi;
            self.z[i] += *d;
        }
        if let Some(h) = self.history.as_mut() {
            for (hist, &z) in h.iter_mut().zip(&self.z) {
                hist.push(z);
            }
        }
        self.k = k;
        Ok(self.t())
    }
}

/// A simulated path on the grid `0, dt, …, M dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub dt: f64,
    /// `samples[i][k] = Z_i(k dt)`.
    pub samples: Vec<Vec<f64>>,
    /// Drift realized on the step ending at grid point `k` (0 at `k = 0`
    /// and while the sensor is pre-change).
    pub drift_samples: Vec<Vec<f64>>,
    /// Model drift on the step ending at `k`, regardless of `τ`; this is what
    /// the detector uses.
    pub model_drift_samples: Vec<Vec<f64>>,
    pub rng_seed: u64,
    pub path_index: u64,
}

impl PathBundle {
    pub fn n_sensors(&self) -> usize {
        self.samples.len()
    }

    /// Number of grid points `M + 1`.
    pub fn n_points(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn horizon(&self) -> f64 {
        (self.n_points() - 1) as f64 * self.dt
    }

    fn energy(&self, drifts: &[f64], from: f64, to: f64) -> Result<f64> {
        let horizon = self.horizon();
        let slack = 1e-9 * self.dt;
        precondition(0.0 <= from && from <= to && to <= horizon + slack, || {
            format!("energy interval [{from}, {to}] outside [0, {horizon}]")
        })?;
        let kf = change_step(from, self.dt).unwrap_or(0);
        let kt = change_step(to, self.dt).unwrap_or(0).min(self.n_points() - 1);
        Ok((kf..kt).map(|k| 0.5 * drifts[k + 1] * drifts[k + 1]).sum::<f64>() * self.dt)
    }

    /// Left-Riemann `∫ ½ α_1(s)² ds` of the realized sensor-1 drift.
    pub fn signal_energy(&self, from: f64, to: f64) -> Result<f64> {
        self.energy(&self.drift_samples[0], from, to)
    }

    /// As [`signal_energy`](Self::signal_energy) but with the model drift,
    /// i.e. the energy clock the detector runs on.
    pub fn model_energy(&self, from: f64, to: f64) -> Result<f64> {
        self.energy(&self.model_drift_samples[0], from, to)
    }

    /// Columnar CSV `t,Z1,…,ZN`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.n_sensors()).map(|i| format!("Z{i}")));
        out.write_record(&header).map_err(csv_err)?;
        for k in 0..self.n_points() {
            let mut row = vec![(k as f64 * self.dt).to_string()];
            row.extend(self.samples.iter().map(|s| s[k].to_string()));
            out.write_record(&row).map_err(csv_err)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Binary dump: `QDPB1`, `u32` sensors, `u64` points, `f64` dt, then
    /// each sensor's samples; all little-endian.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&(self.n_sensors() as u32).to_le_bytes())?;
        w.write_all(&(self.n_points() as u64).to_le_bytes())?;
        w.write_all(&self.dt.to_le_bytes())?;
        for s in &self.samples {
            for v in s {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a binary dump back as `(dt, samples)`.
    pub fn read_binary<R: Read>(mut r: R) -> Result<(f64, Vec<Vec<f64>>)> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != BINARY_MAGIC {
            return Err(Error::Config("not a QDPB1 path dump".into()));
        }
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b4)?;
        let n = u32::from_le_bytes(b4) as usize;
        r.read_exact(&mut b8)?;
        let m = u64::from_le_bytes(b8) as usize;
        r.read_exact(&mut b8)?;
        let dt = f64::from_le_bytes(b8);
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let mut s = Vec::with_capacity(m);
            for _ in 0..m {
                r.read_exact(&mut b8)?;
                s.push(f64::from_le_bytes(b8));
            }
            samples.push(s);
        }
        Ok((dt, samples))
    }
}

pub const BINARY_MAGIC: &[u8; 5] = b"QDPB1";

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Simulates path 0 for `seed` on `[0, horizon]`.
pub fn simulate(
    spec: &SensorSystemSpec,
    taus: &ChangePointVector,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<PathBundle> {
    simulate_path(spec, taus, horizon, dt, seed, 0)
}

pub fn simulate_path(
    spec: &SensorSystemSpec,
    taus: &ChangePointVector,
    horizon: f64,
    dt: f64,
    seed: u64,
    path_index: u64,
) -> Result<PathBundle> {
    precondition(dt > 0.0, || format!("dt = {dt} must be positive"))?;
    precondition(horizon >= dt, || format!("horizon {horizon} shorter than dt {dt}"))?;
    let mut ps = PathStream::new(spec, taus, dt, seed, path_index)?;
    let n = spec.n();
    let steps = (horizon / dt + 1e-9).floor() as usize;
    let mut samples = vec![Vec::with_capacity(steps + 1); n];
    let mut drift_samples = vec![Vec::with_capacity(steps + 1); n];
    let mut model_drift_samples = vec![Vec::with_capacity(steps + 1); n];
    for i in 0..n {
        samples[i].push(0.0);
        drift_samples[i].push(0.0);
        model_drift_samples[i].push(0.0);
    }
    let mut dz = vec![0.0; n];
    for _ in 0..steps {
        ps.step(&mut dz)?;
        for i in 0..n {
            samples[i].push(ps.z()[i]);
            drift_samples[i].push(ps.realized_drift()[i]);
            model_drift_samples[i].push(ps.model_drift()[i]);
        }
    }
    Ok(PathBundle {
        dt,
        samples,
        drift_samples,
        model_drift_samples,
        rng_seed: seed,
        path_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constant(cs: Vec<f64>, mu: f64) -> SensorSystemSpec {
        SensorSystemSpec::constant(cs, mu).unwrap()
    }

    #[test]
    fn paths_start_at_zero_and_are_deterministic() {
        let spec = constant(vec![1.0, 2.0], 1.5);
        let taus = ChangePointVector::new(vec![0.3, f64::INFINITY]).unwrap();
        let a = simulate(&spec, &taus, 1.0, 0.01, 42).unwrap();
        let b = simulate(&spec, &taus, 1.0, 0.01, 42).unwrap();
        let c = simulate(&spec, &taus, 1.0, 0.01, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.n_points(), 101);
        assert!(a.samples.iter().all(|s| s[0] == 0.0));
    }

    #[test]
    fn drift_is_off_until_the_snapped_change_point() {
        let spec = constant(vec![1.0, -2.0], 2.0);
        let taus = ChangePointVector::new(vec![0.5, 0.0]).unwrap();
        let p = simulate(&spec, &taus, 1.0, 0.1, 1).unwrap();
        for k in 0..=10 {
            let t = k as f64 * 0.1;
            if t <= 0.5 + 1e-12 {
                assert_eq!(p.drift_samples[0][k], 0.0, "k = {k}");
            } else {
                assert_eq!(p.drift_samples[0][k], 2.0);
            }
        }
        assert_eq!(p.drift_samples[1][0], 0.0);
        assert_eq!(p.drift_samples[1][1], -1.0);
        // |c_i α_i| = |α_1|
        assert_eq!(
            (p.model_drift_samples[1][3] * -2.0).abs(),
            p.model_drift_samples[0][3].abs()
        );
    }

    #[test]
    fn energy_examples() {
        let spec = constant(vec![1.0], 1.0);
        let p = simulate(&spec, &ChangePointVector::new(vec![0.0]).unwrap(), 2.0, 1e-3, 3).unwrap();
        assert!((p.signal_energy(0.0, 2.0).unwrap() - 1.0).abs() < 1e-9);

        let spec = constant(vec![1.0], 2.0);
        let p = simulate(&spec, &ChangePointVector::new(vec![0.5]).unwrap(), 1.0, 1e-3, 3).unwrap();
        assert!((p.signal_energy(0.0, 1.0).unwrap() - 1.0).abs() < 4e-3);

        let p = simulate(&spec, &ChangePointVector::never(1), 1.0, 1e-3, 3).unwrap();
        assert_eq!(p.signal_energy(0.2, 0.9).unwrap(), 0.0);
        assert!(p.signal_energy(0.0, 1.5).is_err());
    }

    #[test]
    fn energy_converges_under_refinement() {
        let spec = constant(vec![1.0], 2.0);
        let taus = ChangePointVector::new(vec![0.2345]).unwrap();
        let exact = 2.0 * (1.0 - 0.2345);
        let mut errs = vec![];
        for dt in [0.01, 0.005, 0.0025] {
            let p = simulate(&spec, &taus, 1.0, dt, 0).unwrap();
            errs.push((p.signal_energy(0.0, 1.0).unwrap() - exact).abs());
        }
        for (e, dt) in errs.iter().zip([0.01, 0.005, 0.0025]) {
            assert!(*e <= 2.0 * dt + 1e-12);
        }
    }

    #[test]
    fn drift_blowup_is_reported() {
        let spec = SensorSystemSpec::new(
            SignalStrengths::ones(2),
            DriftSpec::custom(|t, _, _| if t > 0.05 { f64::NAN } else { 1.0 }),
        )
        .unwrap();
        let err = simulate(&spec, &ChangePointVector::new(vec![0.0, 0.0]).unwrap(), 1.0, 0.01, 0).unwrap_err();
        assert!(matches!(err, Error::DriftBlowup { sensor: 1, .. }), "{err}");
    }

    #[test]
    fn custom_drift_sees_history() {
        let spec = SensorSystemSpec::new(
            SignalStrengths::ones(1),
            DriftSpec::custom(|_, h, i| if h[i].len() > 5 { 3.0 } else { 0.0 }),
        )
        .unwrap();
        let p = simulate(&spec, &ChangePointVector::new(vec![0.0]).unwrap(), 0.1, 0.01, 0).unwrap();
        assert_eq!(p.drift_samples[0][5], 0.0);
        assert_eq!(p.drift_samples[0][6], 3.0);
    }

    #[test]
    fn rejects_bad_input() {
        let spec = constant(vec![1.0], 1.0);
        let taus = ChangePointVector::never(1);
        assert!(simulate(&spec, &taus, 1.0, -0.1, 0).is_err());
        assert!(simulate(&spec, &taus, 0.001, 0.01, 0).is_err());
        assert!(matches!(
            simulate(&spec, &ChangePointVector::never(2), 1.0, 0.1, 0),
            Err(Error::Dimension(_))
        ));
        assert!(SignalStrengths::new(vec![2.0, 1.0]).is_err());
        assert!(SignalStrengths::new(vec![1.0, 0.5]).is_err());
        assert!(SensorSystemSpec::constant(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn canonical_ordering() {
        let (c, perm) = SignalStrengths::canonical(&[-3.0, 1.0, 2.0]).unwrap();
        assert_eq!(c.as_slice(), &[1.0, 2.0, -3.0]);
        assert_eq!(perm, vec![1, 2, 0]);
        assert_eq!(c.max_squared(), 9.0);
    }

    #[test]
    fn change_points_round_trip_with_infinity() {
        let taus = ChangePointVector::new(vec![0.0, f64::INFINITY, 2.5]).unwrap();
        let json = serde_json::to_string(&taus).unwrap();
        assert_eq!(json, r#"[0.0,"inf",2.5]"#);
        assert_eq!(serde_json::from_str::<ChangePointVector>(&json).unwrap(), taus);
        assert_eq!(taus.min_finite(), 0.0);
        assert!(ChangePointVector::never(2).min_finite().is_infinite());
        assert!(serde_json::from_str::<ChangePointVector>(r#"[-1.0]"#).is_err());
    }

    #[test]
    fn binary_and_csv_export() {
        let spec = constant(vec![1.0, 1.0], 1.0);
        let p = simulate(&spec, &ChangePointVector::never(2), 0.05, 0.01, 9).unwrap();
        let mut buf = vec![];
        p.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..5], b"QDPB1");
        let (dt, samples) = PathBundle::read_binary(&buf[..]).unwrap();
        assert_eq!(dt, 0.01);
        assert_eq!(samples, p.samples);
        let mut csv = vec![];
        p.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("t,Z1,Z2\n0,0,0\n"));
        assert_eq!(text.lines().count(), 7);
    }
}
