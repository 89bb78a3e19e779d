//! `qdetect` command line.
//!
//! Exit codes: 0 success, 2 invalid input or configuration, 3 numerical
//! failure.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use qdetect::calibrate::{calibrate_asymmetric, calibrate_symmetric};
use qdetect::delay_calc::f_origin;
use qdetect::harness::{calibrate_system, init_thread_pool, run_detection_demo, run_gap_experiment, ExperimentConfig};
use qdetect::kernel::{eval_kernel, Sign, SignVector};
use qdetect::oracles::{f_fd_richardson, f_mc_reflected};
use qdetect::{
    run_detector, simulate, ChangePointVector, DriftSpec, SensorSystemSpec, SignalStrengths, ThresholdVector,
};

#[derive(Parser)]
#[command(name = "qdetect", version, about = "Multi-chart CUSUM detection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FMethodArg {
    Series,
    Mc,
    Fd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PathFormat {
    Csv,
    Bin,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one observation path and optionally run the detector on it.
    Simulate {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c: Vec<f64>,
        /// Constant drift μ (α_i = μ/c_i).
        #[arg(long, conflicts_with = "r")]
        mu: Option<f64>,
        /// Linear state-space rate r (α_i = -(r/c_i) Σ_j Z_j).
        #[arg(long)]
        r: Option<f64>,
        /// Change points, `inf` for none.
        #[arg(long, value_delimiter = ',')]
        tau: Vec<String>,
        #[arg(long, default_value_t = 10.0)]
        horizon: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Thresholds; when given the stop report is printed to stderr.
        #[arg(long, value_delimiter = ',')]
        h: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "csv")]
        format: PathFormat,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a calibration sweep from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the detection demo from a config file.
    Demo {
        #[arg(long)]
        config: PathBuf,
    },
    /// Expected energy to alarm from the origin for one sign vector.
    Fvalue {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        signs: Vec<i64>,
        #[arg(long, value_delimiter = ',')]
        h: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c: Vec<f64>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, value_enum, default_value = "series")]
        method: FMethodArg,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long, default_value_t = 200)]
        grid: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Calibrate thresholds for a false-alarm budget γ.
    Calibrate {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c: Vec<f64>,
        #[arg(long)]
        gamma: f64,
        /// Common threshold; requires |c_i| = 1.
        #[arg(long)]
        symmetric: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Calibrate over several γ and print the gap table as CSV.
    GapSweep {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "1,1")]
        c: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        gammas: Vec<f64>,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Evaluate a survival kernel K_{S,ε}(t, 0).
    Kernel {
        #[arg(long, allow_hyphen_values = true)]
        sign: i64,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        t: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

fn parse_taus(raw: &[String], n: usize) -> Result<ChangePointVector> {
    if raw.is_empty() {
        return Ok(ChangePointVector::never(n));
    }
    let taus = raw
        .iter()
        .map(|s| match s.trim() {
            "inf" | "Inf" | "infinity" => Ok(f64::INFINITY),
            t => t.parse::<f64>().with_context(|| format!("bad change point {t:?}")),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChangePointVector::new(taus)?)
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate {
            c,
            mu,
            r,
            tau,
            horizon,
            dt,
            seed,
            h,
            format,
            out,
        } => {
            let drift = match (mu, r) {
                (_, Some(r)) => DriftSpec::LinearStateSpace { r },
                (mu, None) => DriftSpec::Constant { mu: mu.unwrap_or(1.0) },
            };
            let spec = SensorSystemSpec::new(SignalStrengths::new(c)?, drift)?;
            let taus = parse_taus(&tau, spec.n())?;
            let path = simulate(&spec, &taus, horizon, dt, seed)?;
            let sink: Box<dyn Write> = match &out {
                Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
                None => Box::new(io::stdout().lock()),
            };
            let sink = BufWriter::new(sink);
            match format {
                PathFormat::Csv => path.write_csv(sink)?,
                PathFormat::Bin => path.write_binary(sink)?,
            }
            if let Some(h) = h {
                let report = run_detector(&path, &spec, &ThresholdVector::new(h)?)?;
                eprintln!("{}", serde_json::to_string(&report)?);
            }
        }
        Command::Run { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let record = run_gap_experiment(&cfg)?;
            print_json(&record)?;
        }
        Command::Demo { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let record = run_detection_demo(&cfg)?;
            print_json(&record)?;
        }
        Command::Fvalue {
            signs,
            h,
            c,
            tol,
            method,
            paths,
            grid,
            seed,
        } => {
            let sign = SignVector::from_ints(&signs)?;
            let hbar = ThresholdVector::new(h)?;
            let cs = SignalStrengths::new(c)?;
            let (value, error, name) = match method {
                FMethodArg::Series => {
                    let v = f_origin(&sign, &hbar, &cs, tol)?;
                    (v.value, v.error_estimate, serde_json::to_value(v.method)?)
                }
                FMethodArg::Mc => {
                    let e = f_mc_reflected(&sign, &hbar, &cs, paths, None, seed)?;
                    (e.mean, 3.0 * e.stderr, json!("mc_oracle"))
                }
                FMethodArg::Fd => {
                    let e = f_fd_richardson(&sign, &hbar, &cs, grid)?;
                    (e.value, e.error, json!("fd_oracle"))
                }
            };
            print_json(&json!({ "value": value, "error": error, "method": name }))?;
        }
        Command::Calibrate {
            c,
            gamma,
            symmetric,
            tol,
        } => {
            let result = if symmetric {
                let cs = SignalStrengths::new(c.clone())?;
                if !cs.all_unit() {
                    return Err(qdetect::Error::Precondition("--symmetric needs every |c_i| = 1".into()).into());
                }
                calibrate_symmetric(c.len(), gamma, tol)?
            } else {
                calibrate_asymmetric(&SignalStrengths::new(c)?, gamma, tol)?
            };
            print_json(&result)?;
        }
        Command::GapSweep { c, gammas, tol } => {
            if gammas.is_empty() {
                return Err(qdetect::Error::Config("--gammas is empty".into()).into());
            }
            let spec = SensorSystemSpec::new(SignalStrengths::new(c)?, DriftSpec::Constant { mu: 1.0 })?;
            let stdout = io::stdout();
            let mut out = stdout.lock();
            let hs: Vec<String> = (1..=spec.n()).map(|i| format!("h{i}")).collect();
            writeln!(out, "gamma,{},j_kl,lower_bound,gap,provenance", hs.join(","))?;
            for g in gammas {
                let r = calibrate_system(&spec, g, tol)?;
                let hs: Vec<String> = r.hbar.as_slice().iter().map(|h| h.to_string()).collect();
                writeln!(
                    out,
                    "{g},{},{},{},{},analytic",
                    hs.join(","),
                    r.j_kl,
                    r.lower_bound,
                    r.gap
                )?;
            }
        }
        Command::Kernel { sign, eps, t, tol } => {
            let e = eval_kernel(Sign::from_int(sign)?, eps, t, tol)?;
            print_json(&e)?;
        }
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<qdetect::Error>() {
        Some(e) if e.is_config() => 2,
        Some(qdetect::Error::Io(_)) => 2,
        Some(_) => 3,
        None => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
