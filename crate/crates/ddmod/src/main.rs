//! `ddmod`: benchmark runner for OTFS, DR-UFMC and OFDM over time-varying channels.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ddmod_core::harness::{self, ExperimentConfig};
use ddmod_core::Error;

#[derive(Parser, Debug)]
#[command(name = "ddmod", version, about = "Delay-Doppler multicarrier modulation benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Monte-Carlo sweep over waveform, speed, SNR and trial; writes one CSV row per point.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Use the full reference sizes (K=128, N=16, O_s=10) for keys not set in the file.
        #[arg(long)]
        full: bool,
        /// CSV destination; defaults to the `output` key, then stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Transmit PSD per waveform and the guard count meeting the OOB threshold.
    Psd {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        full: bool,
    },
    /// Runs the built-in oracle checks.
    Selftest,
}

const EXIT_ROW_FAILURES: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn load(path: &Path, full: bool) -> Result<ExperimentConfig, ExitCode> {
    harness::load_config_scaled(path, full).map_err(|e| {
        eprintln!("config error in {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn open_output(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn run(config: &Path, full: bool, out: Option<PathBuf>) -> Result<ExitCode, ExitCode> {
    let cfg = load(config, full)?;
    let report = harness::run_sweep(&cfg).map_err(|e| {
        eprintln!("sweep failed: {e}");
        if matches!(e, Error::ConstraintViolation(_) | Error::InvalidConfig(_)) {
            ExitCode::from(EXIT_CONFIG)
        } else {
            ExitCode::from(EXIT_ROW_FAILURES)
        }
    })?;
    let dest = out.or(cfg.output.clone());
    let written = open_output(dest.as_deref())
        .map_err(Error::from)
        .and_then(|w| harness::write_csv(&report.rows, w));
    if let Err(e) = written {
        eprintln!("cannot write CSV: {e}");
        return Err(ExitCode::from(EXIT_ROW_FAILURES));
    }
    for f in &report.failures {
        eprintln!(
            "row failed: {} speed={} snr={} trial={}: {}",
            f.waveform, f.speed_kmh, f.snr_db, f.trial, f.message
        );
    }
    if report.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} of {} rows failed", report.failures.len(), report.failures.len() + report.rows.len());
        Ok(ExitCode::from(EXIT_ROW_FAILURES))
    }
}

fn psd(config: &Path, out: Option<PathBuf>, full: bool) -> Result<ExitCode, ExitCode> {
    let cfg = load(config, full)?;
    let report = harness::run_psd(&cfg).map_err(|e| {
        eprintln!("PSD run failed: {e}");
        ExitCode::from(EXIT_ROW_FAILURES)
    })?;
    let dest = out.or(cfg.psd_output.clone());
    let Some(dest) = dest else {
        eprintln!("no PSD destination: pass --out or set psd_output");
        return Err(ExitCode::from(EXIT_CONFIG));
    };
    let written = File::create(&dest)
        .map_err(Error::from)
        .and_then(|f| report.write_csv(BufWriter::new(f)));
    if let Err(e) = written {
        eprintln!("cannot write {}: {e}", dest.display());
        return Err(ExitCode::from(EXIT_ROW_FAILURES));
    }
    for s in &report.summaries {
        println!("{}", s.line());
    }
    Ok(if report.all_found() { ExitCode::SUCCESS } else { ExitCode::from(EXIT_ROW_FAILURES) })
}

fn selftest() -> ExitCode {
    let results = harness::selftest();
    for r in &results {
        println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
    }
    if results.iter().all(|r| r.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_ROW_FAILURES)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, full, out } => run(&config, full, out),
        Command::Psd { config, out, full } => psd(&config, out, full),
        Command::Selftest => Ok(selftest()),
    };
    outcome.unwrap_or_else(|code| code)
}
