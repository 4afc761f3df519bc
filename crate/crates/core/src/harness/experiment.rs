use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::config::{DopplerClock, FilterNorm, ModemConfig, PulseShape, REFERENCE_CP_SECONDS};
use crate::error::{Error, Result};
use crate::ofdm::OneTapMode;

/// Transceiver chains the sweep can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Waveform {
    Otfs,
    DrUfmc,
    OfdmFull,
    OfdmOneTap,
}

impl Waveform {
    pub const ALL: [Waveform; 4] = [Waveform::Otfs, Waveform::DrUfmc, Waveform::OfdmFull, Waveform::OfdmOneTap];

    pub fn id(self) -> &'static str {
        match self {
            Waveform::Otfs => "otfs",
            Waveform::DrUfmc => "drufmc",
            Waveform::OfdmFull => "ofdm_full",
            Waveform::OfdmOneTap => "ofdm_onetap",
        }
    }

    /// Stable small integer used in seed derivation.
    pub fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Waveform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Waveform {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Waveform::ALL
            .into_iter()
            .find(|w| w.id() == s)
            .ok_or_else(|| format!("unknown waveform `{s}` (expected otfs, drufmc, ofdm_full or ofdm_onetap)"))
    }
}

/// Guard subcarriers per band edge, per waveform family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GuardCounts {
    pub otfs: usize,
    pub drufmc: usize,
    /// Shared by both OFDM detectors.
    pub ofdm: usize,
}

impl GuardCounts {
    /// Per-edge counts at K = 128 for a -30 dB OOB threshold.
    pub const REFERENCE_K: usize = 128;
    pub const REFERENCE_OTFS: usize = 30;
    pub const REFERENCE_DRUFMC: usize = 18;

    /// Reference counts scaled to `subcarriers` in proportion to the band.
    pub fn scaled(subcarriers: usize) -> Self {
        let scale = |g: usize| (g * subcarriers + Self::REFERENCE_K / 2) / Self::REFERENCE_K;
        let otfs = scale(Self::REFERENCE_OTFS);
        GuardCounts {
            otfs,
            drufmc: scale(Self::REFERENCE_DRUFMC),
            ofdm: otfs,
        }
    }

    pub fn for_waveform(&self, w: Waveform) -> usize {
        match w {
            Waveform::Otfs => self.otfs,
            Waveform::DrUfmc => self.drufmc,
            Waveform::OfdmFull | Waveform::OfdmOneTap => self.ofdm,
        }
    }
}

/// Where the sweep takes its guard counts from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GuardSource {
    /// Reference counts scaled to K, unless set explicitly.
    #[default]
    Reference,
    /// Measured with the PSD guard search before the sweep.
    Measure,
}

/// Everything a sweep or PSD run needs.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub modem: ModemConfig,
    pub waveforms: Vec<Waveform>,
    pub snr_db: Vec<f64>,
    pub speeds_kmh: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub oob_threshold_db: f64,
    pub guards: GuardCounts,
    pub guard_source: GuardSource,
    /// Null guard subcarriers at the transmitter instead of only in the metrics.
    pub tx_guard_nulling: bool,
    pub onetap: OneTapMode,
    /// Replace the EVA channel by a single unit tap.
    pub ideal_channel: bool,
    /// Write measured wall-clock time to the CSV (breaks byte-identical reruns).
    pub record_runtime: bool,
    pub psd_trials: usize,
    pub output: Option<PathBuf>,
    pub psd_output: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Reference defaults at the given scale.
    pub fn defaults(full: bool) -> Self {
        let modem = if full { ModemConfig::reference() } else { ModemConfig::desk() };
        ExperimentConfig {
            guards: GuardCounts::scaled(modem.subcarriers),
            modem,
            waveforms: Waveform::ALL.to_vec(),
            snr_db: vec![0.0, 10.0, 20.0, 30.0],
            speeds_kmh: vec![50.0, 500.0],
            trials: 50,
            seed: 1,
            oob_threshold_db: -30.0,
            guard_source: GuardSource::default(),
            tx_guard_nulling: false,
            onetap: OneTapMode::default(),
            ideal_channel: false,
            record_runtime: false,
            psd_trials: 100,
            output: None,
            psd_output: None,
        }
    }

    /// Modem configuration for one waveform, with guard nulling applied if enabled.
    pub fn modem_for(&self, w: Waveform) -> ModemConfig {
        let mut m = self.modem.clone();
        m.tx_guard = if self.tx_guard_nulling { self.guards.for_waveform(w) } else { 0 };
        m
    }

    /// Efficiency factor: the CP overhead for CP-based chains, one for DR-UFMC.
    pub fn efficiency(&self, w: Waveform) -> f64 {
        match w {
            Waveform::DrUfmc => 1.0,
            _ => self.modem.cp_efficiency(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.modem.validate().map_err(|e| Error::ConstraintViolation(e.to_string()))?;
        let violation = |msg: &str| Err(Error::ConstraintViolation(msg.to_string()));
        if self.waveforms.is_empty() {
            return violation("waveform list must not be empty");
        }
        if self.snr_db.is_empty() {
            return violation("SNR grid must not be empty");
        }
        if self.speeds_kmh.is_empty() {
            return violation("speed list must not be empty");
        }
        if self.snr_db.iter().chain(&self.speeds_kmh).any(|v| !v.is_finite()) {
            return violation("SNR and speed values must be finite");
        }
        if self.speeds_kmh.iter().any(|v| *v < 0.0) {
            return violation("speeds must be >= 0");
        }
        if self.trials == 0 {
            return violation("trials must be >= 1");
        }
        if self.psd_trials == 0 {
            return violation("psd_trials must be >= 1");
        }
        let k = self.modem.subcarriers;
        for g in [self.guards.otfs, self.guards.drufmc, self.guards.ofdm] {
            if 2 * g >= k {
                return Err(Error::ConstraintViolation(format!("2 N_G < K violated: N_G = {g}, K = {k}")));
            }
        }
        Ok(())
    }
}

/// Reads and validates a configuration file with reference defaults at full scale.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    load_config_scaled(path, true)
}

/// Reads a configuration file; size keys left unset take the desk-scale
/// values unless `full` is set.
pub fn load_config_scaled(path: &Path, full: bool) -> Result<ExperimentConfig> {
    parse_config(&std::fs::read_to_string(path)?, full)
}

struct Entry {
    line: usize,
    value: String,
}

/// Parses `key = value` text (`#` starts a comment) over the defaults for the given scale.
pub fn parse_config(text: &str, full: bool) -> Result<ExperimentConfig> {
    let mut entries: BTreeMap<&'static str, Entry> = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = canonical_key(key.trim()).ok_or_else(|| Error::Parse {
            line,
            message: format!("unknown key `{}`", key.trim()),
        })?;
        let value = value.trim().to_string();
        if let Some(prev) = entries.insert(key, Entry { line, value }) {
            return Err(Error::Parse {
                line,
                message: format!("duplicate key `{key}` (first set on line {})", prev.line),
            });
        }
    }

    let mut cfg = ExperimentConfig::defaults(full);
    let m = &mut cfg.modem;
    let mut subbands = None;
    let mut cp_len = None;
    let mut cp_us = None;
    let mut guard_otfs = None;
    let mut guard_drufmc = None;
    let mut guard_ofdm = None;
    for (key, e) in &entries {
        let v = e.value.as_str();
        let line = e.line;
        match *key {
            "subcarriers" => m.subcarriers = scalar(v, line)?,
            "symbols" => m.symbols = scalar(v, line)?,
            "oversampling" => m.oversampling = scalar(v, line)?,
            "subband_size" => m.subband_size = scalar(v, line)?,
            "subbands" => subbands = Some(scalar::<usize>(v, line)?),
            "filter_len" => m.filter_len = scalar(v, line)?,
            "filter_atten_db" => m.filter_atten_db = scalar(v, line)?,
            "filter_norm" => {
                m.filter_norm = choice(v, line, &[("unit_dc", FilterNorm::UnitDcGain), ("unit_energy", FilterNorm::UnitEnergy)])?
            }
            "cp_len" => cp_len = Some(scalar::<usize>(v, line)?),
            "cp_us" => cp_us = Some(scalar::<f64>(v, line)?),
            "subcarrier_spacing_hz" => m.subcarrier_spacing = scalar(v, line)?,
            "carrier_freq_hz" => m.carrier_freq = scalar(v, line)?,
            "tx_power" => m.tx_power = scalar(v, line)?,
            "pulse" => m.pulse = choice(v, line, &[("ideal", PulseShape::Ideal), ("rrc", PulseShape::RootRaisedCosine)])?,
            "doppler_clock" => {
                m.doppler_clock = choice(v, line, &[("literal", DopplerClock::Literal), ("absolute", DopplerClock::Absolute)])?
            }
            "waveforms" => cfg.waveforms = list(v, line)?,
            "snr_db" => cfg.snr_db = list(v, line)?,
            "speeds_kmh" => cfg.speeds_kmh = list(v, line)?,
            "trials" => cfg.trials = scalar(v, line)?,
            "seed" => cfg.seed = scalar(v, line)?,
            "oob_threshold_db" => cfg.oob_threshold_db = scalar(v, line)?,
            "guard_otfs" => guard_otfs = Some(scalar::<usize>(v, line)?),
            "guard_drufmc" => guard_drufmc = Some(scalar::<usize>(v, line)?),
            "guard_ofdm" => guard_ofdm = Some(scalar::<usize>(v, line)?),
            "guard_source" => {
                cfg.guard_source = choice(v, line, &[("reference", GuardSource::Reference), ("measure", GuardSource::Measure)])?
            }
            "guard_nulling" => cfg.tx_guard_nulling = choice(v, line, &[("accounting", false), ("tx", true)])?,
            "onetap" => cfg.onetap = choice(v, line, &[("mmse", OneTapMode::Mmse), ("zf", OneTapMode::ZeroForcing)])?,
            "ideal_channel" => cfg.ideal_channel = flag(v, line)?,
            "record_runtime" => cfg.record_runtime = flag(v, line)?,
            "psd_trials" => cfg.psd_trials = scalar(v, line)?,
            "output" => cfg.output = Some(PathBuf::from(v)),
            "psd_output" => cfg.psd_output = Some(PathBuf::from(v)),
            other => unreachable!("canonical key {other} not handled"),
        }
    }

    let m = &mut cfg.modem;
    if m.oversampling == 0 {
        return Err(Error::ConstraintViolation("O_s >= 1 violated: O_s = 0".into()));
    }
    if let Some(b) = subbands {
        if b * m.subband_size != m.subcarriers {
            return Err(Error::ConstraintViolation(format!(
                "K = B*D violated: K = {}, B = {b}, D = {}",
                m.subcarriers, m.subband_size
            )));
        }
    }
    if m.subcarriers == 0 || m.subcarrier_spacing <= 0.0 {
        return Err(Error::ConstraintViolation("K >= 2 and subcarrier spacing > 0 required".into()));
    }
    m.cp_len = match (cp_len, cp_us) {
        (Some(_), Some(_)) => {
            return Err(Error::ConstraintViolation("set at most one of cp_len and cp_us".into()));
        }
        (Some(n), None) => n,
        (None, Some(us)) if us >= 0.0 && us.is_finite() => m.cp_samples_for(us * 1e-6),
        (None, Some(us)) => return Err(Error::ConstraintViolation(format!("cp_us = {us} must be >= 0"))),
        (None, None) => m.cp_samples_for(REFERENCE_CP_SECONDS),
    };
    let scaled = GuardCounts::scaled(m.subcarriers);
    let otfs = guard_otfs.unwrap_or(scaled.otfs);
    cfg.guards = GuardCounts {
        otfs,
        drufmc: guard_drufmc.unwrap_or(scaled.drufmc),
        ofdm: guard_ofdm.unwrap_or(otfs),
    };
    cfg.validate()?;
    Ok(cfg)
}

fn canonical_key(key: &str) -> Option<&'static str> {
    const KEYS: &[(&str, &[&str])] = &[
        ("subcarriers", &["K"]),
        ("symbols", &["N"]),
        ("oversampling", &["Os", "O_s"]),
        ("subband_size", &["D"]),
        ("subbands", &["B"]),
        ("filter_len", &["L"]),
        ("filter_atten_db", &["A_dB"]),
        ("filter_norm", &[]),
        ("cp_len", &["N_CP"]),
        ("cp_us", &[]),
        ("subcarrier_spacing_hz", &["delta_f"]),
        ("carrier_freq_hz", &["f_c"]),
        ("tx_power", &["P_T"]),
        ("pulse", &[]),
        ("doppler_clock", &[]),
        ("waveforms", &[]),
        ("snr_db", &[]),
        ("speeds_kmh", &[]),
        ("trials", &[]),
        ("seed", &[]),
        ("oob_threshold_db", &[]),
        ("guard_otfs", &[]),
        ("guard_drufmc", &[]),
        ("guard_ofdm", &[]),
        ("guard_source", &[]),
        ("guard_nulling", &[]),
        ("onetap", &[]),
        ("ideal_channel", &[]),
        ("record_runtime", &[]),
        ("psd_trials", &[]),
        ("output", &[]),
        ("psd_output", &[]),
    ];
    KEYS.iter()
        .find(|(name, aliases)| *name == key || aliases.contains(&key))
        .map(|(name, _)| *name)
}

fn scalar<T: FromStr>(v: &str, line: usize) -> Result<T>
where
    T::Err: fmt::Display,
{
    v.parse().map_err(|e: T::Err| Error::Parse {
        line,
        message: format!("invalid value `{v}`: {e}"),
    })
}

fn list<T: FromStr>(v: &str, line: usize) -> Result<Vec<T>>
where
    T::Err: fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| scalar(s, line))
        .collect()
}

fn flag(v: &str, line: usize) -> Result<bool> {
    choice(v, line, &[("true", true), ("false", false), ("1", true), ("0", false)])
}

fn choice<T: Copy>(v: &str, line: usize, options: &[(&str, T)]) -> Result<T> {
    options.iter().find(|(name, _)| *name == v).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
        Error::Parse {
            line,
            message: format!("invalid value `{v}`, expected one of {}", names.join(", ")),
        }
    })
}
