use std::io::Write;

use num_complex::Complex64;

use super::experiment::{ExperimentConfig, Waveform};
use super::sweep::{derive_seed, PSD_STREAM};
use crate::drufmc::DrUfmcModem;
use crate::error::{Error, Result};
use crate::metrics::{guard_count_for_threshold, oob_level_db, psd_estimate, qpsk_grid, Psd, WelchSpec};
use crate::ofdm::OfdmModem;
use crate::otfs::OtfsModem;

/// Welch PSD of the serialized transmit signal of `waveform` with `guard`
/// edge subcarriers nulled on each side.
pub fn transmit_psd(cfg: &ExperimentConfig, waveform: Waveform, guard: usize) -> Result<Psd> {
    let mut m = cfg.modem.clone();
    m.tx_guard = guard;
    m.validate()?;
    let (k, n) = (m.subcarriers, m.symbols);
    let spec = WelchSpec {
        segment: 4 * m.block_len(),
        sample_rate: m.sample_rate(),
    };
    let seed = derive_seed(&[cfg.seed, PSD_STREAM, waveform.index()]);
    match waveform {
        Waveform::Otfs => {
            let modem = OtfsModem::new(&m)?;
            psd_estimate(|rng| modem.modulate(&qpsk_grid(rng, k, n)), spec, cfg.psd_trials, seed)
        }
        Waveform::DrUfmc => {
            let modem = DrUfmcModem::new(&m)?;
            psd_estimate(|rng| modem.modulate(&qpsk_grid(rng, k, n)), spec, cfg.psd_trials, seed)
        }
        Waveform::OfdmFull | Waveform::OfdmOneTap => {
            let modem = OfdmModem::new(&m)?;
            psd_estimate(|rng| modem.modulate(&qpsk_grid(rng, k, n)), spec, cfg.psd_trials, seed)
        }
    }
}

/// Smallest per-edge guard count meeting the configured OOB threshold.
pub fn measure_guard_count(cfg: &ExperimentConfig, waveform: Waveform) -> Result<usize> {
    let max_guard = cfg.modem.subcarriers / 2 - 1;
    guard_count_for_threshold(
        |g| transmit_psd(cfg, waveform, g),
        cfg.oob_threshold_db,
        cfg.modem.band_edge(),
        max_guard,
    )
}

/// Guard search outcome for one waveform.
#[derive(Debug, Clone)]
pub struct GuardSummary {
    pub waveform: Waveform,
    /// Per-edge guard count, or the reason none was found.
    pub guard: std::result::Result<usize, String>,
    /// OOB level with no guard subcarriers, dB relative to the in-band peak.
    pub oob_unguarded_db: f64,
}

impl GuardSummary {
    pub fn line(&self) -> String {
        match &self.guard {
            Ok(g) => format!(
                "{}: 2N_G = {} (N_G = {g} per edge), OOB without guards {:.1} dB",
                self.waveform,
                2 * g,
                self.oob_unguarded_db
            ),
            Err(e) => format!("{}: {e}", self.waveform),
        }
    }
}

#[derive(Debug, Clone)]
pub struct PsdReport {
    /// `(waveform, guard, psd)` for the unguarded signal and at the found guard count.
    pub spectra: Vec<(Waveform, usize, Psd)>,
    pub summaries: Vec<GuardSummary>,
}

impl PsdReport {
    pub fn all_found(&self) -> bool {
        self.summaries.iter().all(|s| s.guard.is_ok())
    }

    /// `waveform,guard,freq_hz,power_db` with power relative to each spectrum's peak.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "waveform,guard,freq_hz,power_db")?;
        for (w, g, psd) in &self.spectra {
            for (f, p) in psd.freqs_hz.iter().zip(psd.normalized_db()) {
                writeln!(out, "{w},{g},{f:.1},{p:.4}")?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// PSD and guard search for every configured waveform with a distinct transmitter.
pub fn run_psd(cfg: &ExperimentConfig) -> Result<PsdReport> {
    cfg.validate()?;
    let mut waveforms: Vec<Waveform> = cfg
        .waveforms
        .iter()
        .map(|&w| if w == Waveform::OfdmOneTap { Waveform::OfdmFull } else { w })
        .collect();
    waveforms.dedup();
    let mut report = PsdReport {
        spectra: Vec::new(),
        summaries: Vec::new(),
    };
    for w in waveforms {
        if report.summaries.iter().any(|s| s.waveform == w) {
            continue;
        }
        let open = transmit_psd(cfg, w, 0)?;
        let oob = oob_level_db(&open, cfg.modem.band_edge());
        report.spectra.push((w, 0, open));
        let guard = match measure_guard_count(cfg, w) {
            Ok(g) => {
                if g > 0 {
                    report.spectra.push((w, g, transmit_psd(cfg, w, g)?));
                }
                Ok(g)
            }
            Err(e @ Error::NotAchievable { .. }) => Err(e.to_string()),
            Err(e) => return Err(e),
        };
        report.summaries.push(GuardSummary {
            waveform: w,
            guard,
            oob_unguarded_db: oob,
        });
    }
    Ok(report)
}

/// Samples of the serialized transmit frame, for inspection.
pub fn transmit_frame(cfg: &ExperimentConfig, waveform: Waveform, seed: u64) -> Result<Vec<Complex64>> {
    use rand::SeedableRng;
    let m = cfg.modem_for(waveform);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let x = qpsk_grid(&mut rng, m.subcarriers, m.symbols);
    match waveform {
        Waveform::Otfs => OtfsModem::new(&m)?.modulate(&x),
        Waveform::DrUfmc => DrUfmcModem::new(&m)?.modulate(&x),
        _ => OfdmModem::new(&m)?.modulate(&x),
    }
}
