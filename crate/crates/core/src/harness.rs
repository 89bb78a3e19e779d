//! Experiment orchestration: configs, calibration sweeps, Monte Carlo
//! campaigns and the files they leave behind.
//!
//! Every run writes into `output_dir`:
//! * a CSV table where each number carries a provenance tag
//!   (`analytic`, `asymptotic` or `mc`);
//! * one JSON line per run appended to `records.jsonl`;
//! * plot-ready two-column `.dat` files.
//!
//! CSV output depends only on the config, so identical configs give
//! identical bytes. Wall-clock time goes to the JSON record only.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibrate::{calibrate_asymmetric, calibrate_symmetric, CalibrationResult};
use crate::cusum::{Monitoring, ThresholdVector};
use crate::delay_calc::{f_delay_asymptotic, simulate_outcomes, DelayMcOptions, PathOutcome};
use crate::error::{precondition, Error, Result};
use crate::oracles::reflected::McEstimate;
use crate::sde_sim::{ChangePointVector, DriftSpec, SensorSystemSpec};

fn default_monitoring() -> Monitoring {
    Monitoring::Bridge
}

fn default_tol() -> f64 {
    1e-8
}

fn default_bins() -> usize {
    40
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SensorSystemSpec,
    pub tau_scenarios: Vec<ChangePointVector>,
    pub gamma_sweep: Vec<f64>,
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Fixed thresholds for the detection demo; calibrated per `γ` otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<ThresholdVector>,
    #[serde(default = "default_monitoring")]
    pub monitoring: Monitoring,
    /// Monte Carlo check of each worst-case delay during the gap sweep.
    #[serde(default)]
    pub mc_verify: bool,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_horizon: Option<f64>,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let n = self.system.n();
        if self.gamma_sweep.is_empty() {
            return Err(Error::Config("gamma_sweep is empty".into()));
        }
        if self.tau_scenarios.is_empty() {
            return Err(Error::Config("tau_scenarios is empty".into()));
        }
        if let Some(g) = self.gamma_sweep.iter().find(|g| !(**g > 0.0 && g.is_finite())) {
            return Err(Error::Config(format!("γ = {g} must be positive and finite")));
        }
        for (k, t) in self.tau_scenarios.iter().enumerate() {
            if t.len() != n {
                return Err(Error::Config(format!(
                    "scenario {k} has {} change points for {n} sensors",
                    t.len()
                )));
            }
        }
        if let Some(h) = &self.thresholds {
            if h.len() != n {
                return Err(Error::Config(format!("{} thresholds for {n} sensors", h.len())));
            }
        }
        if self.n_paths < 100 {
            return Err(Error::Config(format!("n_paths = {} is below 100", self.n_paths)));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt = {} must be positive", self.dt)));
        }
        if self.tol.is_nan() || self.tol <= 0.0 || self.histogram_bins == 0 {
            return Err(Error::Config("tol and histogram_bins must be positive".into()));
        }
        Ok(())
    }

    /// Reads TOML or JSON, chosen by extension (`.json`, else TOML).
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg = if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json")) {
            Self::from_json(&text)?
        } else {
            Self::from_toml(&text)?
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the compact JSON form.
    pub fn hash(&self) -> Result<String> {
        let json = serde_json::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        let digest = Sha256::digest(json.as_bytes());
        Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    Asymptotic,
    Mc,
}

impl Provenance {
    fn as_str(self) -> &'static str {
        match self {
            Provenance::Analytic => "analytic",
            Provenance::Asymptotic => "asymptotic",
            Provenance::Mc => "mc",
        }
    }
}

/// Monte Carlo summary of one `(γ, scenario)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEstimate {
    pub gamma: f64,
    pub taus: ChangePointVector,
    /// `delay` when some sensor changes, `false_alarm` otherwise.
    pub quantity: String,
    pub energy: McEstimate,
    /// The matching value of `f` at the origin, when one applies.
    pub analytic: Option<f64>,
    /// Mean time from the first change (or from 0) to the alarm; only for
    /// constant drifts.
    pub wall_time: Option<McEstimate>,
    pub nonstopping: usize,
    pub early_alarms: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub kind: String,
    pub config_hash: String,
    pub toolkit_version: String,
    pub calibrations: Vec<CalibrationResult>,
    pub estimates: Vec<ScenarioEstimate>,
    pub wall_clock_seconds: f64,
    pub files: Vec<PathBuf>,
}

/// Caps the global rayon pool at `QDETECT_THREADS` when set. Calling it twice
/// is harmless.
pub fn init_thread_pool() -> Result<()> {
    let Ok(v) = std::env::var("QDETECT_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("QDETECT_THREADS = {v:?} is not a positive integer")))?;
    precondition(n > 0, || "QDETECT_THREADS must be positive".into())?;
    if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
        log::debug!("thread pool already initialised");
    }
    Ok(())
}

/// Calibrates symmetric systems by a common threshold and asymmetric ones by
/// balanced thresholds.
pub fn calibrate_system(spec: &SensorSystemSpec, gamma: f64, tol: f64) -> Result<CalibrationResult> {
    if spec.cs.all_unit() {
        calibrate_symmetric(spec.n(), gamma, tol)
    } else {
        calibrate_asymmetric(&spec.cs, gamma, tol)
    }
}

/// `log γ + 2 log|c_N| + log K - 1` with `K` the number of sensors with `|c_i| = 1`.
pub fn asymptotic_j_kl(spec: &SensorSystemSpec, gamma: f64) -> f64 {
    let cn2 = spec.cs.max_squared();
    let k = spec.cs.squared().iter().filter(|&&c2| c2 == 1.0).count();
    gamma.ln() + cn2.ln() + (k as f64).ln() - 1.0
}

fn mc_options(cfg: &ExperimentConfig) -> DelayMcOptions {
    DelayMcOptions {
        n_paths: cfg.n_paths,
        dt: cfg.dt,
        seed: cfg.seed,
        monitoring: cfg.monitoring,
        max_horizon: cfg.max_horizon,
    }
}

fn summarize(
    spec: &SensorSystemSpec,
    gamma: f64,
    taus: &ChangePointVector,
    outcomes: &[PathOutcome],
    analytic: Option<f64>,
) -> Result<ScenarioEstimate> {
    let total = outcomes.len();
    let nonstopping = outcomes.iter().filter(|o| !o.stopped).count();
    if nonstopping * 1000 > total {
        let horizon = outcomes.iter().map(|o| o.stop_time).fold(0.0, f64::max);
        return Err(Error::NonStopping {
            nonstopping,
            total,
            horizon,
        });
    }
    let tau = taus.min_finite();
    let energies: Vec<f64> = outcomes.iter().map(|o| o.energy).collect();
    let early_alarms = if tau.is_finite() {
        outcomes.iter().filter(|o| o.stop_time <= tau).count()
    } else {
        0
    };
    let wall_time = match spec.drift {
        DriftSpec::Constant { .. } => {
            let start = if tau.is_finite() { tau } else { 0.0 };
            let times: Vec<f64> = outcomes.iter().map(|o| (o.stop_time - start).max(0.0)).collect();
            Some(McEstimate::from_samples(&times))
        }
        _ => None,
    };
    Ok(ScenarioEstimate {
        gamma,
        taus: taus.clone(),
        quantity: if tau.is_finite() { "delay" } else { "false_alarm" }.into(),
        energy: McEstimate::from_samples(&energies),
        analytic,
        wall_time,
        nonstopping,
        early_alarms,
    })
}

fn append_record(dir: &Path, record: &ExperimentRecord) -> Result<()> {
    let mut f = OpenOptions::new()
        .create(true)
        .append(true)
        .open(dir.join("records.jsonl"))?;
    let line = serde_json::to_string(record).map_err(|e| Error::Config(e.to_string()))?;
    writeln!(f, "{line}")?;
    Ok(())
}

fn row(w: &mut csv::Writer<fs::File>, fields: &[String]) -> Result<()> {
    w.write_record(fields).map_err(|e| Error::Io(std::io::Error::other(e)))
}

/// Calibrates at every `γ`, evaluates delays and gap, optionally verifies
/// the worst-case delays by simulation, and writes `gap.csv`,
/// `gap_vs_loggamma.dat` and a line of `records.jsonl`.
pub fn run_gap_experiment(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = &cfg.system;
    let n = spec.n();
    let calibrations: Vec<CalibrationResult> = cfg
        .gamma_sweep
        .par_iter()
        .map(|&g| calibrate_system(spec, g, cfg.tol).map_err(|e| e.context(format!("calibrating at γ = {g}"))))
        .collect::<Result<_>>()?;

    let mut estimates = Vec::new();
    if cfg.mc_verify {
        for cal in &calibrations {
            for j in 0..n {
                let taus = ChangePointVector::only(n, j);
                let ctx = || format!("Monte Carlo delay at γ = {}, sensor {}", cal.gamma, j + 1);
                let outcomes =
                    simulate_outcomes(spec, &taus, &cal.hbar, &mc_options(cfg)).map_err(|e| e.context(ctx()))?;
                estimates.push(
                    summarize(spec, cal.gamma, &taus, &outcomes, Some(cal.delays[j])).map_err(|e| e.context(ctx()))?,
                );
            }
        }
    }

    fs::create_dir_all(&cfg.output_dir)?;
    let csv_path = cfg.output_dir.join("gap.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    row(
        &mut w,
        &["gamma", "quantity", "sensor", "value", "stderr", "provenance"].map(String::from),
    )?;
    let emit =
        |w: &mut csv::Writer<fs::File>, g: f64, q: &str, s: Option<usize>, v: f64, se: Option<f64>, p: Provenance| {
            row(
                w,
                &[
                    g.to_string(),
                    q.to_string(),
                    s.map_or(String::new(), |s| (s + 1).to_string()),
                    v.to_string(),
                    se.map_or(String::new(), |x| x.to_string()),
                    p.as_str().to_string(),
                ],
            )
        };
    for cal in &calibrations {
        let g = cal.gamma;
        for (j, h) in cal.hbar.as_slice().iter().enumerate() {
            emit(&mut w, g, "threshold", Some(j), *h, None, Provenance::Analytic)?;
        }
        for (j, d) in cal.delays.iter().enumerate() {
            emit(&mut w, g, "delay", Some(j), *d, None, Provenance::Analytic)?;
            emit(
                &mut w,
                g,
                "delay",
                Some(j),
                f_delay_asymptotic(j, &cal.hbar, &cal.strengths),
                None,
                Provenance::Asymptotic,
            )?;
        }
        for e in estimates.iter().filter(|e| e.gamma == g) {
            let j = e.taus.as_slice().iter().position(|t| t.is_finite());
            emit(
                &mut w,
                g,
                "delay",
                j,
                e.energy.mean,
                Some(e.energy.stderr),
                Provenance::Mc,
            )?;
        }
        emit(
            &mut w,
            g,
            "false_alarm",
            None,
            cal.false_alarm,
            None,
            Provenance::Analytic,
        )?;
        emit(&mut w, g, "nu_star", None, cal.nu_star, None, Provenance::Analytic)?;
        emit(
            &mut w,
            g,
            "lower_bound",
            None,
            cal.lower_bound,
            None,
            Provenance::Analytic,
        )?;
        emit(&mut w, g, "j_kl", None, cal.j_kl, None, Provenance::Analytic)?;
        emit(
            &mut w,
            g,
            "j_kl",
            None,
            asymptotic_j_kl(spec, g),
            None,
            Provenance::Asymptotic,
        )?;
        emit(&mut w, g, "gap", None, cal.gap, None, Provenance::Analytic)?;
    }
    w.flush()?;

    let dat_path = cfg.output_dir.join("gap_vs_loggamma.dat");
    let mut dat = String::from("# log_gamma gap\n");
    for cal in &calibrations {
        let _ = writeln!(dat, "{} {}", cal.gamma.ln(), cal.gap);
    }
    fs::write(&dat_path, dat)?;

    let record = ExperimentRecord {
        kind: "gap".into(),
        config_hash: cfg.hash()?,
        toolkit_version: env!("CARGO_PKG_VERSION").into(),
        calibrations,
        estimates,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        files: vec![csv_path, dat_path],
    };
    append_record(&cfg.output_dir, &record)?;
    Ok(record)
}

/// Histogram over `[0, max]` as `(bin centre, count)` pairs.
pub fn histogram(xs: &[f64], bins: usize) -> Vec<(f64, usize)> {
    let max = xs.iter().copied().fold(0.0, f64::max);
    let width = if max > 0.0 { max / bins as f64 } else { 1.0 };
    let mut counts = vec![0usize; bins];
    for &x in xs {
        let b = ((x / width) as usize).min(bins - 1);
        counts[b] += 1;
    }
    counts
        .into_iter()
        .enumerate()
        .map(|(i, c)| ((i as f64 + 0.5) * width, c))
        .collect()
}

/// Simulates every scenario at every `γ` (or at the fixed thresholds),
/// reports energies to alarm and writes `demo.csv`, one histogram file per
/// cell and a line of `records.jsonl`.
///
/// Energies are in the `∫ ½ α_1² ds` clock, so the all-pre-change scenario
/// targets `c_N² γ`.
pub fn run_detection_demo(cfg: &ExperimentConfig) -> Result<ExperimentRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let spec = &cfg.system;
    let cn2 = spec.cs.max_squared();
    let calibrations: Vec<CalibrationResult> = match &cfg.thresholds {
        Some(_) => Vec::new(),
        None => cfg
            .gamma_sweep
            .iter()
            .map(|&g| calibrate_system(spec, g, cfg.tol).map_err(|e| e.context(format!("calibrating at γ = {g}"))))
            .collect::<Result<_>>()?,
    };
    let cells: Vec<(f64, ThresholdVector, Option<&CalibrationResult>)> = match &cfg.thresholds {
        Some(h) => cfg.gamma_sweep.iter().map(|&g| (g, h.clone(), None)).collect(),
        None => calibrations
            .iter()
            .map(|c| (c.gamma, c.hbar.clone(), Some(c)))
            .collect(),
    };

    fs::create_dir_all(&cfg.output_dir)?;
    let mut files = Vec::new();
    let csv_path = cfg.output_dir.join("demo.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    row(
        &mut w,
        &[
            "gamma",
            "scenario",
            "quantity",
            "clock",
            "value",
            "stderr",
            "n_paths",
            "provenance",
        ]
        .map(String::from),
    )?;
    let mut estimates = Vec::new();
    for (gi, (gamma, hbar, cal)) in cells.iter().enumerate() {
        for (si, taus) in cfg.tau_scenarios.iter().enumerate() {
            let ctx = || format!("scenario {si} at γ = {gamma}");
            let mut outcomes = simulate_outcomes(spec, taus, hbar, &mc_options(cfg)).map_err(|e| e.context(ctx()))?;
            let pre_change = !taus.min_finite().is_finite();
            if pre_change {
                // report the false alarm energy in the sensor-1 clock
                for o in &mut outcomes {
                    o.energy *= cn2;
                }
            }
            let analytic = cal.map(|c| if pre_change { c.false_alarm } else { c.j_kl });
            let est = summarize(spec, *gamma, taus, &outcomes, analytic).map_err(|e| e.context(ctx()))?;
            let base = |q: &str, clock: &str, v: f64, se: Option<f64>, np: Option<usize>, p: Provenance| {
                vec![
                    gamma.to_string(),
                    si.to_string(),
                    q.to_string(),
                    clock.to_string(),
                    v.to_string(),
                    se.map_or(String::new(), |x| x.to_string()),
                    np.map_or(String::new(), |x| x.to_string()),
                    p.as_str().to_string(),
                ]
            };
            let q = est.quantity.clone();
            row(
                &mut w,
                &base(
                    &q,
                    "energy",
                    est.energy.mean,
                    Some(est.energy.stderr),
                    Some(est.energy.n_paths),
                    Provenance::Mc,
                ),
            )?;
            if let Some(t) = &est.wall_time {
                row(
                    &mut w,
                    &base(&q, "time", t.mean, Some(t.stderr), Some(t.n_paths), Provenance::Mc),
                )?;
            }
            if let Some(a) = analytic {
                row(&mut w, &base(&q, "energy", a, None, None, Provenance::Analytic))?;
            }
            if pre_change {
                row(
                    &mut w,
                    &base(&q, "energy", cn2 * gamma, None, None, Provenance::Asymptotic),
                )?;
            }
            let hist_path = cfg.output_dir.join(format!("hist_g{gi}_s{si}.dat"));
            let mut text = format!("# {q} energy histogram, gamma {gamma}, scenario {si}\n");
            let energies: Vec<f64> = outcomes.iter().map(|o| o.energy).collect();
            for (x, c) in histogram(&energies, cfg.histogram_bins) {
                let _ = writeln!(text, "{x} {c}");
            }
            fs::write(&hist_path, text)?;
            files.push(hist_path);
            estimates.push(est);
        }
    }
    w.flush()?;
    files.insert(0, csv_path);

    let record = ExperimentRecord {
        kind: "demo".into(),
        config_hash: cfg.hash()?,
        toolkit_version: env!("CARGO_PKG_VERSION").into(),
        calibrations,
        estimates,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        files,
    };
    append_record(&cfg.output_dir, &record)?;
    Ok(record)
}
