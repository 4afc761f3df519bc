//! OFDM baselines: the OTFS chain without ISFFT/SFFT, detected either with a
//! full multicarrier-multisymbol MMSE or with per-subcarrier one-tap equalizers.

use num_complex::Complex64;

use crate::channel::ChannelMatrixSet;
use crate::config::ModemConfig;
use crate::error::{mismatch, Result};
use crate::metrics::SinrMap;
use crate::otfs::{EffectiveChannel, OfdmCore};
use crate::transforms::ComplexMatrix;

/// Scalar used by the one-tap equalizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OneTapMode {
    #[default]
    Mmse,
    ZeroForcing,
}

#[derive(Debug, Clone)]
pub struct OfdmModem {
    core: OfdmCore,
}

impl OfdmModem {
    pub fn new(cfg: &ModemConfig) -> Result<Self> {
        Ok(OfdmModem {
            core: OfdmCore::new(cfg)?,
        })
    }

    pub fn config(&self) -> &ModemConfig {
        &self.core.cfg
    }

    /// Data symbols ride directly on the frequency-time grid.
    pub fn modulate(&self, x_ft: &ComplexMatrix) -> Result<Vec<Complex64>> {
        self.core.modulate_ft(x_ft)
    }

    pub fn apply_channel(&self, s: &[Complex64], chan: &ChannelMatrixSet, noise_var: f64, seed: u64) -> Result<Vec<Complex64>> {
        self.core.check_channel(chan)?;
        chan.transmit(s, self.core.cfg.tx_power, noise_var, seed)
    }

    pub fn demodulate(&self, r: &[Complex64]) -> Result<ComplexMatrix> {
        self.core.demodulate_ft(r)
    }

    /// Block-diagonal `KN x KN` matrix with blocks `sqrt(P_T) W H_i W^H`.
    pub fn effective_channel(&self, chan: &ChannelMatrixSet) -> Result<EffectiveChannel> {
        self.core.check_channel(chan)?;
        let cfg = &self.core.cfg;
        let (k, n) = (cfg.subcarriers, cfg.symbols);
        let amp = Complex64::new(cfg.tx_power.sqrt(), 0.0);
        let mut out = ComplexMatrix::zeros(k * n, k * n);
        for (i, t) in self.core.ft_channels(chan)?.into_iter().enumerate() {
            out.view_mut((i * k, i * k), (k, k)).copy_from(&(t * amp));
        }
        if cfg.tx_guard > 0 {
            let g = cfg.tx_guard;
            for j in 0..k * n {
                let sc = j % k;
                if sc < g || sc >= k - g {
                    out.column_mut(j).fill(Complex64::new(0.0, 0.0));
                }
            }
        }
        Ok(EffectiveChannel {
            matrix: out,
            tx_power: cfg.tx_power,
        })
    }
}

pub fn ofdm_full_effective_channel(chan: &ChannelMatrixSet, cfg: &ModemConfig) -> Result<EffectiveChannel> {
    OfdmModem::new(cfg)?.effective_channel(chan)
}

/// Per-bin scalar equalization of `Y^FT` using the diagonal of the effective
/// FT-domain channel `c` (which already carries `sqrt(P_T)`):
/// `conj(c) y / (|c|^2 + noise_var)` or `y / c`.
pub fn ofdm_onetap_fde(y_ft: &ComplexMatrix, chan: &EffectiveChannel, noise_var: f64, mode: OneTapMode) -> Result<ComplexMatrix> {
    let (k, n) = y_ft.shape();
    if chan.dim() != k * n {
        return Err(mismatch(format!("{}x{} channel", k * n, k * n), format!("{0}x{0}", chan.dim())));
    }
    Ok(ComplexMatrix::from_fn(k, n, |sc, sym| {
        let j = sym * k + sc;
        let c = chan.matrix[(j, j)];
        let y = y_ft[(sc, sym)];
        match mode {
            OneTapMode::Mmse => {
                let den = c.norm_sqr() + noise_var;
                if den == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    c.conj() * y / den
                }
            }
            OneTapMode::ZeroForcing => {
                if c.norm_sqr() == 0.0 {
                    Complex64::new(0.0, 0.0)
                } else {
                    y / c
                }
            }
        }
    }))
}

/// SINR of the one-tap equalizer: diagonal power against the rest of the row
/// (inter-carrier leakage) plus noise. The scalar weight cancels, so ZF and
/// MMSE share this map.
pub fn onetap_sinr(chan: &EffectiveChannel, noise_var: f64, subcarriers: usize) -> Result<SinrMap> {
    let dim = chan.dim();
    if subcarriers == 0 || dim % subcarriers != 0 {
        return Err(mismatch(format!("multiple of {subcarriers}"), format!("{dim}")));
    }
    let values = (0..dim)
        .map(|j| {
            let row = chan.matrix.row(j);
            let signal = row[j].norm_sqr();
            let leak: f64 = row.iter().map(|z| z.norm_sqr()).sum::<f64>() - signal;
            let den = leak.max(0.0) + noise_var;
            if den == 0.0 {
                f64::INFINITY
            } else {
                signal / den
            }
        })
        .collect();
    SinrMap::new(values, subcarriers, dim / subcarriers)
}
