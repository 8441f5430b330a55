//! Command-line surface of the `coaxnoise` binary.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 I/O or input-file
//! error, 3 fit did not converge (report still written), 4 insufficient data,
//! 5 oracle check failed.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{parse_config, TopologyConfig};
use crate::csv_io::{read_spectrum_file, write_atomic, write_spectrum_file, write_sweep_file};
use crate::error::{Error, Result};
use crate::fit::{fit, fit_report, parse_parameter_list, FitConfig, FitProblem};
use crate::measurement::{model_spectrum, synth_spectrum, NetworkModel, NoiseSpectrum};
use crate::splitter::{sweep_arm_length, ArmPort, LimitIndex, SweepModel, SweepRecord};
use crate::tline::{bounce_series_oracle, source_divided_voltage, total_voltage_closed_form};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_IO: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_INSUFFICIENT_DATA: i32 = 4;
pub const EXIT_ORACLE_FAILED: i32 = 5;

/// Relative deviation below which `oracle-check` passes.
pub const ORACLE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(
    name = "coaxnoise",
    version,
    about = "Coaxial-line and splitter thermal-noise spectra"
)]
pub struct Cli {
    /// Seed for every random draw (synthetic noise, oracle frequencies).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the model spectrum on the configured grid.
    Simulate(SimulateArgs),
    /// Sweep one splitter arm length and write a long-format surface.
    Sweep(SweepArgs),
    /// Fit free parameters to an observed spectrum.
    Fit(FitArgs),
    /// Compare the bounce series with the closed form at random frequencies.
    OracleCheck(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareTarget {
    Matched,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the spectrum normalized to the matched network
    /// (`<out>.matched.csv`, linear power ratio in the level column).
    #[arg(long, value_enum)]
    pub compare: Option<CompareTarget>,
    /// Add Gaussian noise of this standard deviation to the display level.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u8).range(3..=4))]
    pub arm: u8,
    #[arg(long)]
    pub from: f64,
    #[arg(long)]
    pub to: f64,
    #[arg(long, default_value_t = 41)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub observed: PathBuf,
    /// Comma-separated free parameters, e.g. `L,a,sn`.
    #[arg(long)]
    pub free: String,
    /// JSON fit report.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = FitConfig::default().max_iterations)]
    pub max_iter: usize,
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Optional JSON summary.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    pub terms: usize,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a, cli.seed),
        Command::Sweep(a) => cmd_sweep(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::OracleCheck(a) => cmd_oracle_check(&a, cli.seed),
    }
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Format { .. } | Error::NonMonotonicFrequency { .. } => EXIT_IO,
        Error::InsufficientData(_) => EXIT_INSUFFICIENT_DATA,
        _ => EXIT_CONFIG,
    }
}

fn report(result: Result<i32>) -> i32 {
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn load_config(path: &Path) -> Result<TopologyConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config(&text)
}

/// `out.csv` becomes `out.matched.csv`.
pub fn matched_trace_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned());
    let name = match ext {
        Some(ext) => format!("{stem}.matched.{ext}"),
        None => format!("{stem}.matched"),
    };
    out.with_file_name(name)
}

pub fn cmd_simulate(args: &SimulateArgs, seed: u64) -> i32 {
    report((|| {
        let cfg = load_config(&args.config)?;
        let model = cfg.model();
        let spectrum = match args.noise_sigma {
            Some(sigma) => synth_spectrum(&model, &cfg.grid, sigma, seed)?,
            None => model_spectrum(&model, &cfg.grid)?,
        };
        write_spectrum_file(&args.out, &spectrum)?;
        println!("wrote {} points to {}", spectrum.len(), args.out.display());
        if args.compare == Some(CompareTarget::Matched) {
            let rel = cfg.network.relative_spectrum(&cfg.grid)?;
            let trace = NoiseSpectrum {
                frequencies: rel.frequencies.clone(),
                linear_power: Some(rel.power.clone()),
                display_level: rel.power.clone(),
                excluded: rel.excluded.clone(),
            };
            let path = matched_trace_path(&args.out);
            write_spectrum_file(&path, &trace)?;
            println!("wrote matched-normalized trace to {}", path.display());
        }
        if spectrum.included_count() < spectrum.len() {
            eprintln!(
                "warning: {} points excluded at resonance poles",
                spectrum.len() - spectrum.included_count()
            );
        }
        Ok(EXIT_OK)
    })())
}

/// Evenly spaced lengths from `from` to `to` inclusive; a zero-width range
/// gives the single length `from`.
pub fn sweep_lengths(from: f64, to: f64, steps: usize) -> Result<Vec<f64>> {
    if !(from.is_finite() && to.is_finite() && from >= 0.0 && to >= from) {
        return Err(Error::Validation(format!(
            "sweep range [{from}, {to}] violates 0 <= from <= to"
        )));
    }
    if from == to {
        return Ok(vec![from]);
    }
    if steps < 2 {
        return Err(Error::Validation(format!(
            "a sweep over [{from}, {to}] needs steps >= 2, got {steps}"
        )));
    }
    let h = (to - from) / (steps - 1) as f64;
    let mut v: Vec<f64> = (0..steps).map(|i| from + i as f64 * h).collect();
    v[steps - 1] = to;
    Ok(v)
}

/// Sweep records with power converted to display level, using the same
/// network form and normalization as `simulate`.
pub fn sweep_levels(
    cfg: &TopologyConfig,
    port: ArmPort,
    lengths: &[f64],
) -> Result<Vec<SweepRecord>> {
    let (setup, model) = match cfg.network {
        NetworkModel::SplitterLimit(s, m) => (s, SweepModel::Limit(m)),
        NetworkModel::SplitterFull(s) => (s, SweepModel::Full),
        NetworkModel::SingleCable(_) => {
            return Err(Error::Validation(
                "sweep requires mode = \"splitter\"".into(),
            ))
        }
    };
    if let SweepModel::Limit(m) = model {
        debug_assert_eq!(LimitIndex::from_setup(&setup), Some(m));
    }
    let mut records = sweep_arm_length(&setup, &cfg.grid, port, lengths, model)?;
    let reference = NetworkModel::SplitterFull(setup);
    for r in &mut records {
        r.power = if r.power.is_nan() {
            f64::NAN
        } else {
            let rel = r.power / reference.reference_power(r.frequency)?;
            cfg.display.level(rel)?
        };
    }
    Ok(records)
}

pub fn cmd_sweep(args: &SweepArgs) -> i32 {
    report((|| {
        let cfg = load_config(&args.config)?;
        let port = ArmPort::from_number(args.arm)?;
        let lengths = sweep_lengths(args.from, args.to, args.steps)?;
        let records = sweep_levels(&cfg, port, &lengths)?;
        write_sweep_file(&args.out, &records)?;
        println!(
            "wrote {} lengths x {} frequencies to {}",
            lengths.len(),
            cfg.grid.len(),
            args.out.display()
        );
        Ok(EXIT_OK)
    })())
}

pub fn cmd_fit(args: &FitArgs) -> i32 {
    let setup = (|| {
        let cfg = load_config(&args.config)?;
        let free = parse_parameter_list(&args.free)?;
        let observed = read_spectrum_file(&args.observed)?;
        FitProblem::new(observed, cfg.model(), &free)
    })();
    let problem = match setup {
        Ok(p) => p,
        Err(e) => return report(Err(e)),
    };
    let config = FitConfig {
        max_iterations: args.max_iter,
        starts: args.starts.max(1),
        ..FitConfig::default()
    };
    report((|| {
        let result = fit(&problem, &config)?;
        let rep = fit_report(&result, &problem);
        let json =
            serde_json::to_string_pretty(&rep).map_err(|e| Error::Io(std::io::Error::other(e)))?;
        write_atomic(&args.out, |w| {
            w.write_all(json.as_bytes())?;
            w.write_all(b"\n")?;
            Ok(())
        })?;
        print!("{rep}");
        Ok(if result.converged {
            EXIT_OK
        } else {
            EXIT_NOT_CONVERGED
        })
    })())
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OracleSummary {
    pub terms: usize,
    pub samples: usize,
    pub max_relative_deviation: f64,
    pub worst_frequency_hz: f64,
    pub passed: bool,
}

pub fn oracle_summary(
    cfg: &TopologyConfig,
    terms: usize,
    samples: usize,
    seed: u64,
) -> Result<OracleSummary> {
    let setup = cfg
        .cable()
        .ok_or_else(|| Error::Validation("oracle-check requires mode = \"single-cable\"".into()))?;
    if terms == 0 || samples == 0 {
        return Err(Error::Validation(
            "oracle-check needs terms >= 1 and samples >= 1".into(),
        ));
    }
    let loop_gain = (setup.load_reflection() * setup.source_reflection()).norm();
    if loop_gain >= 1.0 - 1e-12 {
        return Err(Error::Validation(format!(
            "|Gamma_l Gamma_b| = {loop_gain} has no convergent bounce series"
        )));
    }
    let (lo, hi) = {
        let g = cfg.grid.as_slice();
        (g[0], g[g.len() - 1])
    };
    let direct = source_divided_voltage(setup).norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0f64, lo);
    for _ in 0..samples {
        let f = rng.gen_range(lo..=hi);
        let closed = total_voltage_closed_form(setup, f)?;
        let series = bounce_series_oracle(setup, f, terms);
        let diff = (series - closed).norm();
        // scaled by the larger of the total and the direct wave: near a null
        // the total alone only measures rounding in the cancellation
        let dev = if diff == 0.0 {
            0.0
        } else {
            diff / closed.norm().max(direct)
        };
        if dev > worst.0 || dev.is_nan() {
            worst = (dev, f);
        }
    }
    Ok(OracleSummary {
        terms,
        samples,
        max_relative_deviation: worst.0,
        worst_frequency_hz: worst.1,
        passed: worst.0 < ORACLE_TOLERANCE,
    })
}

pub fn cmd_oracle_check(args: &OracleArgs, seed: u64) -> i32 {
    report((|| {
        let cfg = load_config(&args.config)?;
        let s = oracle_summary(&cfg, args.terms, args.samples, seed)?;
        println!(
            "max relative deviation {:.3e} at {:.6e} Hz over {} samples, {} terms: {}",
            s.max_relative_deviation,
            s.worst_frequency_hz,
            s.samples,
            s.terms,
            if s.passed { "pass" } else { "FAIL" }
        );
        if let Some(out) = &args.out {
            let json = serde_json::to_string_pretty(&s)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
            write_atomic(out, |w| {
                w.write_all(json.as_bytes())?;
                w.write_all(b"\n")?;
                Ok(())
            })?;
        }
        Ok(if s.passed {
            EXIT_OK
        } else {
            EXIT_ORACLE_FAILED
        })
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lengths() {
        assert_eq!(sweep_lengths(1.0, 1.0, 10).unwrap(), vec![1.0]);
        assert_eq!(
            sweep_lengths(0.0, 4.0, 5).unwrap(),
            vec![0.0, 1.0, 2.0, 3.0, 4.0]
        );
        assert!(sweep_lengths(0.0, 4.0, 1).is_err());
        assert!(sweep_lengths(2.0, 1.0, 5).is_err());
        assert!(sweep_lengths(-1.0, 1.0, 5).is_err());
    }

    #[test]
    fn matched_path() {
        assert_eq!(
            matched_trace_path(Path::new("/t/s.csv")),
            PathBuf::from("/t/s.matched.csv")
        );
        assert_eq!(
            matched_trace_path(Path::new("s")),
            PathBuf::from("s.matched")
        );
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(run(["coaxnoise", "frobnicate"]), EXIT_CONFIG);
        assert_eq!(
            run([
                "coaxnoise",
                "sweep",
                "--config",
                "x",
                "--out",
                "y",
                "--arm",
                "5",
                "--from",
                "0",
                "--to",
                "1"
            ]),
            EXIT_CONFIG
        );
        assert_eq!(run(["coaxnoise", "--help"]), EXIT_OK);
    }

    #[test]
    fn missing_config_is_io() {
        assert_eq!(
            run([
                "coaxnoise",
                "simulate",
                "--config",
                "/nonexistent/c.toml",
                "--out",
                "/tmp/x.csv"
            ]),
            EXIT_IO
        );
    }
}
