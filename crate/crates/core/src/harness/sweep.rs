use std::io::Write;
use std::time::Instant;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::experiment::{ExperimentConfig, GuardSource, Waveform};
use crate::channel::{channel_matrices, materialize_taps, sample_eva_paths, ChannelMatrixSet, PathSet};
use crate::config::ModemConfig;
use crate::drufmc::DrUfmcModem;
use crate::error::{Error, Result};
use crate::metrics::{avg_spectral_efficiency, net_sinr, normalized_mse, qpsk_grid, MmseEngine, SinrMap};
use crate::ofdm::{ofdm_onetap_fde, onetap_sinr, OfdmModem};
use crate::otfs::{EffectiveChannel, OtfsModem};
use crate::transforms::{vec, ComplexMatrix};

pub const CSV_HEADER: &str = "waveform,speed_kmh,snr_db,trial,net_sinr_db,avg_se_bps_hz,nmse,runtime_s";

const CHANNEL_STREAM: u64 = 0x4348;
const DATA_STREAM: u64 = 0x4441;
const NOISE_STREAM: u64 = 0x4e4f;
pub(crate) const PSD_STREAM: u64 = 0x5053;

/// One evaluated grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub waveform: Waveform,
    pub speed_kmh: f64,
    pub snr_db: f64,
    pub trial: usize,
    /// Seed of the data and noise draws for this row.
    pub seed: u64,
    pub net_sinr_db: f64,
    pub avg_se: f64,
    pub nmse: f64,
    pub runtime_s: f64,
}

impl ResultRow {
    pub fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{:.6e},{:.6}",
            self.waveform, self.speed_kmh, self.snr_db, self.trial, self.net_sinr_db, self.avg_se, self.nmse, self.runtime_s
        )
    }
}

/// A grid point that could not be evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct RowFailure {
    pub waveform: Waveform,
    pub speed_kmh: f64,
    pub snr_db: f64,
    pub trial: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct SweepReport {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<RowFailure>,
}

impl SweepReport {
    /// Trial-averaged `(net SINR in dB, SE)`; SINR averaged in the linear domain.
    pub fn mean(&self, waveform: Waveform, speed_kmh: f64, snr_db: f64) -> Option<(f64, f64)> {
        let sel: Vec<&ResultRow> = self
            .rows
            .iter()
            .filter(|r| r.waveform == waveform && r.speed_kmh == speed_kmh && r.snr_db == snr_db)
            .collect();
        if sel.is_empty() {
            return None;
        }
        let n = sel.len() as f64;
        let sinr = sel.iter().map(|r| 10f64.powf(r.net_sinr_db / 10.0)).sum::<f64>() / n;
        let se = sel.iter().map(|r| r.avg_se).sum::<f64>() / n;
        Some((10.0 * sinr.log10(), se))
    }
}

/// Mixes identifiers into a 64-bit seed (splitmix64 finalizer chain).
pub fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9e37_79b9_7f4a_7c15;
    for &p in parts {
        h = h.wrapping_add(p).wrapping_add(0x9e37_79b9_7f4a_7c15);
        h = (h ^ (h >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        h = (h ^ (h >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        h ^= h >> 31;
    }
    h
}

fn channel_paths(cfg: &ExperimentConfig, speed_idx: usize, trial: usize) -> Result<PathSet> {
    if cfg.ideal_channel {
        return Ok(PathSet::ideal());
    }
    let seed = derive_seed(&[cfg.seed, CHANNEL_STREAM, speed_idx as u64, trial as u64]);
    sample_eva_paths(seed, cfg.speeds_kmh[speed_idx] / 3.6, cfg.modem.carrier_freq)
}

fn channel_for(paths: &PathSet, m: &ModemConfig, waveform: Waveform) -> Result<ChannelMatrixSet> {
    let with_cp = waveform != Waveform::DrUfmc;
    let block = m.block_len() + if with_cp { m.cp_len } else { 0 };
    channel_matrices(&materialize_taps(paths, m, block)?, m, with_cp)
}

enum Chain {
    Otfs(OtfsModem),
    DrUfmc(DrUfmcModem),
    Ofdm(OfdmModem),
}

impl Chain {
    fn new(waveform: Waveform, m: &ModemConfig) -> Result<Self> {
        Ok(match waveform {
            Waveform::Otfs => Chain::Otfs(OtfsModem::new(m)?),
            Waveform::DrUfmc => Chain::DrUfmc(DrUfmcModem::new(m)?),
            Waveform::OfdmFull | Waveform::OfdmOneTap => Chain::Ofdm(OfdmModem::new(m)?),
        })
    }

    fn effective_channel(&self, chan: &ChannelMatrixSet) -> Result<EffectiveChannel> {
        match self {
            Chain::Otfs(m) => m.effective_channel(chan),
            Chain::DrUfmc(m) => m.effective_channel(chan),
            Chain::Ofdm(m) => m.effective_channel(chan),
        }
    }

    /// Transmits `x` through the noisy chain and returns the receiver grid.
    fn receive(&self, x: &ComplexMatrix, chan: &ChannelMatrixSet, noise_var: f64, seed: u64) -> Result<ComplexMatrix> {
        match self {
            Chain::Otfs(m) => m.demodulate(&m.apply_channel(&m.modulate(x)?, chan, noise_var, seed)?),
            Chain::DrUfmc(m) => m.demodulate(&m.apply_channel(&m.modulate(x)?, chan, noise_var, seed)?),
            Chain::Ofdm(m) => m.demodulate(&m.apply_channel(&m.modulate(x)?, chan, noise_var, seed)?),
        }
    }
}

fn guard_nmse(estimate: &[Complex64], reference: &[Complex64], k: usize, guard: usize) -> Result<f64> {
    let keep = |j: &usize| {
        let sc = j % k;
        sc >= guard && sc < k - guard
    };
    let est: Vec<Complex64> = estimate.iter().enumerate().filter(|(j, _)| keep(j)).map(|(_, z)| *z).collect();
    let refr: Vec<Complex64> = reference.iter().enumerate().filter(|(j, _)| keep(j)).map(|(_, z)| *z).collect();
    normalized_mse(&est, &refr)
}

/// Rows for every SNR point of one (waveform, speed, trial) triple.
pub fn trial_rows(cfg: &ExperimentConfig, waveform: Waveform, speed_idx: usize, trial: usize) -> Result<Vec<ResultRow>> {
    let start = Instant::now();
    let m = cfg.modem_for(waveform);
    let (k, n) = (m.subcarriers, m.symbols);
    let guard = cfg.guards.for_waveform(waveform);
    let xi = cfg.efficiency(waveform);
    let paths = channel_paths(cfg, speed_idx, trial)?;
    let chan = channel_for(&paths, &m, waveform)?;
    let chain = Chain::new(waveform, &m)?;
    let c = chain.effective_channel(&chan)?;
    let engine = match waveform {
        Waveform::OfdmOneTap => None,
        _ => Some(MmseEngine::new(&c.matrix)?),
    };
    let setup = start.elapsed().as_secs_f64() / cfg.snr_db.len() as f64;

    let mut rows = Vec::with_capacity(cfg.snr_db.len());
    for (snr_idx, &snr_db) in cfg.snr_db.iter().enumerate() {
        let t0 = Instant::now();
        let noise_var = m.tx_power / 10f64.powf(snr_db / 10.0);
        let seed = derive_seed(&[cfg.seed, DATA_STREAM, waveform.index(), speed_idx as u64, snr_idx as u64, trial as u64]);
        let mmse = engine.as_ref().map(|e| e.at(noise_var)).transpose()?;
        let map: SinrMap = match &mmse {
            None => onetap_sinr(&c, noise_var, k)?,
            Some(at) => at.sinr_grid(k)?,
        };
        let sinr = net_sinr(&map, guard)?;
        let se = avg_spectral_efficiency(&map, xi, guard)?;

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = qpsk_grid(&mut rng, k, n);
        let y = chain.receive(&x, &chan, noise_var, derive_seed(&[seed, NOISE_STREAM]))?;
        let estimate: Vec<Complex64> = match &mmse {
            None => vec(&ofdm_onetap_fde(&y, &c, noise_var, cfg.onetap)?).as_slice().to_vec(),
            Some(at) => {
                let yv: DVector<Complex64> = vec(&y);
                at.detect(&c.matrix, &yv)?.as_slice().to_vec()
            }
        };
        let nmse = guard_nmse(&estimate, x.as_slice(), k, guard)?;
        if !(sinr.is_finite() && se.is_finite() && nmse.is_finite()) {
            return Err(Error::IllConditioned(format!("non-finite metrics at SNR {snr_db} dB")));
        }
        rows.push(ResultRow {
            waveform,
            speed_kmh: cfg.speeds_kmh[speed_idx],
            snr_db,
            trial,
            seed,
            net_sinr_db: sinr,
            avg_se: se,
            nmse,
            runtime_s: if cfg.record_runtime { setup + t0.elapsed().as_secs_f64() } else { 0.0 },
        });
    }
    Ok(rows)
}

/// Evaluates every (waveform, speed, SNR, trial) point. Rows are sorted by
/// waveform, speed, SNR and trial; failed points are reported separately.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let mut cfg = cfg.clone();
    if cfg.guard_source == GuardSource::Measure {
        let otfs = super::psd::measure_guard_count(&cfg, Waveform::Otfs)?;
        cfg.guards.otfs = otfs;
        cfg.guards.ofdm = otfs;
        cfg.guards.drufmc = super::psd::measure_guard_count(&cfg, Waveform::DrUfmc)?;
        log::info!("measured guard counts: {:?}", cfg.guards);
    }
    let cfg = &cfg;
    let units: Vec<(Waveform, usize, usize)> = cfg
        .waveforms
        .iter()
        .flat_map(|&w| (0..cfg.speeds_kmh.len()).flat_map(move |s| (0..cfg.trials).map(move |t| (w, s, t))))
        .collect();

    let evaluate = || -> Vec<(Waveform, usize, usize, Result<Vec<ResultRow>>)> {
        units
            .par_iter()
            .map(|&(w, s, t)| (w, s, t, trial_rows(cfg, w, s, t)))
            .collect()
    };
    let outcomes = match super::thread_cap() {
        Some(threads) => rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?
            .install(evaluate),
        None => evaluate(),
    };

    let mut report = SweepReport::default();
    for (w, s, t, outcome) in outcomes {
        match outcome {
            Ok(rows) => report.rows.extend(rows),
            Err(e) => {
                log::error!("{w} at {} km/h, trial {t}: {e}", cfg.speeds_kmh[s]);
                report.failures.extend(cfg.snr_db.iter().map(|&snr_db| RowFailure {
                    waveform: w,
                    speed_kmh: cfg.speeds_kmh[s],
                    snr_db,
                    trial: t,
                    message: e.to_string(),
                }));
            }
        }
    }
    let order = |w: Waveform, speed: f64, snr: f64, trial: usize| {
        (
            cfg.waveforms.iter().position(|x| *x == w),
            cfg.speeds_kmh.iter().position(|x| *x == speed),
            cfg.snr_db.iter().position(|x| *x == snr),
            trial,
        )
    };
    report.rows.sort_by_key(|r| order(r.waveform, r.speed_kmh, r.snr_db, r.trial));
    report.failures.sort_by_key(|r| order(r.waveform, r.speed_kmh, r.snr_db, r.trial));
    Ok(report)
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.csv_line())?;
    }
    out.flush()?;
    Ok(())
}
