//! Scalar waveform parameters shared by every transceiver chain.

use crate::error::{Error, Result};

/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Combined transmit/receive shaping pulse used when materializing channel taps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseShape {
    /// Each path delay is rounded to the nearest sample and contributes one unit tap.
    #[default]
    Ideal,
    /// Raised-cosine response of a root-raised-cosine pair, roll-off 0.25, truncated to +-4 samples.
    RootRaisedCosine,
}

/// Time origin used for the Doppler phase of symbol `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DopplerClock {
    /// Phase index `l + r + i - 1` exactly as in the tap formula: consecutive symbols are one sample apart.
    #[default]
    Literal,
    /// Symbol `i` starts `(i - 1) * block_len` samples after the first one.
    Absolute,
}

/// Normalization applied to the Dolph-Chebyshev prototype filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FilterNorm {
    /// `(sum g)^2 = 1`: unit gain at the subband center.
    #[default]
    UnitDcGain,
    /// `sum g^2 = 1`: unit energy.
    UnitEnergy,
}

/// All scalar waveform parameters of a modem.
#[derive(Debug, Clone, PartialEq)]
pub struct ModemConfig {
    /// Number of subcarriers (delay bins) `K`.
    pub subcarriers: usize,
    /// Number of multicarrier symbols (Doppler bins) `N`.
    pub symbols: usize,
    /// Oversampling factor `O_s`.
    pub oversampling: usize,
    /// Subcarriers per UFMC subband `D`; `K / D` subbands.
    pub subband_size: usize,
    /// Dolph-Chebyshev filter length `L`.
    pub filter_len: usize,
    /// Dolph-Chebyshev side-lobe attenuation in dB.
    pub filter_atten_db: f64,
    pub filter_norm: FilterNorm,
    /// OTFS / OFDM cyclic prefix length in oversampled samples.
    pub cp_len: usize,
    /// Subcarrier spacing in Hz.
    pub subcarrier_spacing: f64,
    /// Carrier frequency in Hz.
    pub carrier_freq: f64,
    /// Transmit power `P_T` (linear).
    pub tx_power: f64,
    pub pulse: PulseShape,
    pub doppler_clock: DopplerClock,
    /// Null `guard` edge subcarriers on each side at the transmitter.
    pub tx_guard: usize,
}

impl ModemConfig {
    /// Simulation setup of the reference evaluation: K=128, N=16, O_s=10, 120 kHz at 28 GHz.
    pub fn reference() -> Self {
        let mut cfg = ModemConfig {
            subcarriers: 128,
            symbols: 16,
            oversampling: 10,
            subband_size: 16,
            filter_len: 60,
            filter_atten_db: 100.0,
            filter_norm: FilterNorm::default(),
            cp_len: 0,
            subcarrier_spacing: 120e3,
            carrier_freq: 28e9,
            tx_power: 1.0,
            pulse: PulseShape::default(),
            doppler_clock: DopplerClock::default(),
            tx_guard: 0,
        };
        cfg.cp_len = cfg.cp_samples_for(REFERENCE_CP_SECONDS);
        cfg
    }

    /// Reduced configuration used for fast Monte-Carlo runs: K=32, N=8, O_s=4, D=8, L=16.
    pub fn desk() -> Self {
        let mut cfg = ModemConfig {
            subcarriers: 32,
            symbols: 8,
            oversampling: 4,
            subband_size: 8,
            filter_len: 16,
            ..Self::reference()
        };
        cfg.cp_len = cfg.cp_samples_for(REFERENCE_CP_SECONDS);
        cfg
    }

    /// Number of UFMC subbands `B = K / D`.
    pub fn subbands(&self) -> usize {
        self.subcarriers / self.subband_size
    }

    /// Oversampled samples per symbol, `K * O_s`.
    pub fn block_len(&self) -> usize {
        self.subcarriers * self.oversampling
    }

    /// Oversampled sample period `T_s / O_s` in seconds.
    pub fn sample_period(&self) -> f64 {
        1.0 / (self.subcarriers as f64 * self.subcarrier_spacing * self.oversampling as f64)
    }

    pub fn sample_rate(&self) -> f64 {
        1.0 / self.sample_period()
    }

    /// Symbol interval `T = 1 / delta_f`.
    pub fn symbol_duration(&self) -> f64 {
        1.0 / self.subcarrier_spacing
    }

    pub fn cp_duration(&self) -> f64 {
        self.cp_len as f64 * self.sample_period()
    }

    /// Converts a cyclic-prefix duration to whole oversampled samples.
    pub fn cp_samples_for(&self, seconds: f64) -> usize {
        (seconds / self.sample_period()).round() as usize
    }

    /// Efficiency factor `T / (T + T_CP)` of the CP-based chains.
    pub fn cp_efficiency(&self) -> f64 {
        let t = self.symbol_duration();
        t / (t + self.cp_duration())
    }

    /// Nominal one-sided bandwidth `K * delta_f / 2` in Hz.
    pub fn band_edge(&self) -> f64 {
        self.subcarriers as f64 * self.subcarrier_spacing / 2.0
    }

    /// Maximum Doppler shift for a terminal speed in m/s.
    pub fn max_doppler(&self, speed_mps: f64) -> f64 {
        self.carrier_freq * speed_mps / SPEED_OF_LIGHT
    }

    /// Checks the structural invariants every chain relies on.
    pub fn validate(&self) -> Result<()> {
        let k = self.subcarriers;
        if k < 2 || k % 2 != 0 {
            return Err(Error::InvalidConfig(format!("K = {k} must be even and >= 2")));
        }
        if self.symbols == 0 {
            return Err(Error::InvalidConfig("N must be >= 1".into()));
        }
        if self.oversampling == 0 {
            return Err(Error::InvalidConfig("O_s must be >= 1".into()));
        }
        if self.subband_size == 0 || k % self.subband_size != 0 {
            return Err(Error::InvalidConfig(format!(
                "K = B*D violated: K = {k}, D = {}",
                self.subband_size
            )));
        }
        if self.filter_len == 0 || self.filter_len > self.block_len() + 1 {
            return Err(Error::InvalidConfig(format!(
                "filter length {} must lie in 1..={}",
                self.filter_len,
                self.block_len() + 1
            )));
        }
        if self.filter_len >= 2 && !(self.filter_atten_db > 0.0) {
            return Err(Error::InvalidAttenuation(self.filter_atten_db));
        }
        if self.cp_len > self.block_len() {
            return Err(Error::InvalidConfig(format!(
                "cyclic prefix {} longer than symbol {}",
                self.cp_len,
                self.block_len()
            )));
        }
        if !(self.subcarrier_spacing > 0.0 && self.carrier_freq > 0.0 && self.tx_power > 0.0) {
            return Err(Error::InvalidConfig(
                "subcarrier spacing, carrier frequency and transmit power must be positive".into(),
            ));
        }
        if 2 * self.tx_guard >= k {
            return Err(Error::InvalidGuard {
                guard: self.tx_guard,
                subcarriers: k,
            });
        }
        Ok(())
    }
}

/// Cyclic prefix duration of the reference setup (0.586 us).
pub const REFERENCE_CP_SECONDS: f64 = 0.586e-6;
