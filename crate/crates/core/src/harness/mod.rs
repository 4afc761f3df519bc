//! Experiment runner: configuration files, seeded Monte-Carlo sweeps, PSD and
//! guard-count measurement, and a quick oracle self-test.

mod experiment;
mod psd;
mod selftest;
mod sweep;

pub use experiment::{load_config, load_config_scaled, parse_config, ExperimentConfig, GuardCounts, GuardSource, Waveform};
pub use psd::{measure_guard_count, run_psd, transmit_frame, transmit_psd, GuardSummary, PsdReport};
pub use selftest::{selftest, SelfTestResult};
pub use sweep::{derive_seed, run_sweep, trial_rows, write_csv, ResultRow, RowFailure, SweepReport, CSV_HEADER};

/// Worker count from `DDMOD_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("DDMOD_THREADS").ok()?.trim().parse().ok().filter(|n: &usize| *n > 0)
}
