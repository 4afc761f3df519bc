//! OTFS transceiver: ISFFT pre-processing, oversampled CP-OFDM modulator and
//! the matching demodulator, plus the effective delay-Doppler channel `Psi`.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::ChannelMatrixSet;
use crate::config::ModemConfig;
use crate::error::{mismatch, Result};
use crate::transforms::{self, invec, oversampled_dft, vec, ComplexMatrix, Symplectic};

/// Linear map from vectorized transmit symbols to vectorized receiver outputs.
#[derive(Debug, Clone)]
pub struct EffectiveChannel {
    /// `KN x KN`, includes the `sqrt(P_T)` factor.
    pub matrix: ComplexMatrix,
    pub tx_power: f64,
}

impl EffectiveChannel {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Noiseless response to `x`.
    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        &self.matrix * x
    }
}

/// Zeroes `guard` subcarriers at each edge of a frequency-time grid.
pub(crate) fn null_edges(x_ft: &mut ComplexMatrix, guard: usize) {
    let k = x_ft.nrows();
    for r in (0..guard).chain(k - guard..k) {
        x_ft.row_mut(r).fill(Complex64::new(0.0, 0.0));
    }
}

/// `KN x KN` projector that nulls the edge subcarriers of `vec(X^FT)`.
pub(crate) fn ft_guard_mask(cfg: &ModemConfig) -> DVector<Complex64> {
    let k = cfg.subcarriers;
    let g = cfg.tx_guard;
    DVector::from_fn(k * cfg.symbols, |j, _| {
        let sc = j % k;
        if sc < g || sc >= k - g {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}

/// Right-multiplies `c` by the delay-Doppler image of the FT guard projector.
pub(crate) fn restrict_dd_input(c: &ComplexMatrix, sym: &Symplectic, cfg: &ModemConfig) -> ComplexMatrix {
    let t = sym.kron_operator();
    let mask = ft_guard_mask(cfg);
    let mut masked = t.clone();
    for (mut row, m) in masked.row_iter_mut().zip(mask.iter()) {
        row *= *m;
    }
    c * (t.adjoint() * masked)
}

/// Oversampled CP-OFDM modulator/demodulator shared by OTFS and the OFDM baselines.
#[derive(Debug, Clone)]
pub struct OfdmCore {
    pub(crate) cfg: ModemConfig,
    pub(crate) w: ComplexMatrix,
    w_h: ComplexMatrix,
}

impl OfdmCore {
    pub fn new(cfg: &ModemConfig) -> Result<Self> {
        cfg.validate()?;
        let w = oversampled_dft(cfg.subcarriers, cfg.oversampling)?;
        Ok(OfdmCore {
            cfg: cfg.clone(),
            w_h: w.adjoint(),
            w,
        })
    }

    /// Samples per transmitted block, `K O_s + N_CP`.
    pub fn tx_block(&self) -> usize {
        self.cfg.block_len() + self.cfg.cp_len
    }

    /// `vec(A_CP W^H X^FT)`; edge subcarriers are nulled first when `tx_guard > 0`.
    pub fn modulate_ft(&self, x_ft: &ComplexMatrix) -> Result<Vec<Complex64>> {
        let (k, n) = (self.cfg.subcarriers, self.cfg.symbols);
        if x_ft.shape() != (k, n) {
            return Err(mismatch(format!("{k}x{n} grid"), format!("{}x{}", x_ft.nrows(), x_ft.ncols())));
        }
        let mut x = x_ft.clone();
        if self.cfg.tx_guard > 0 {
            null_edges(&mut x, self.cfg.tx_guard);
        }
        let s = &self.w_h * x;
        let m = self.cfg.block_len();
        let cp = self.cfg.cp_len;
        let mut out = Vec::with_capacity(self.tx_block() * n);
        for col in s.column_iter() {
            out.extend(col.iter().skip(m - cp));
            out.extend(col.iter());
        }
        Ok(out)
    }

    /// Drops the CP and trailing channel tail of each received block and applies the oversampled FFT.
    pub fn demodulate_ft(&self, r: &[Complex64]) -> Result<ComplexMatrix> {
        let n = self.cfg.symbols;
        let m = self.cfg.block_len();
        let cp = self.cfg.cp_len;
        if r.is_empty() || r.len() % n != 0 || r.len() / n < m + cp {
            return Err(mismatch(
                format!("N * rows with rows >= {}", m + cp),
                format!("{} samples", r.len()),
            ));
        }
        let rows = r.len() / n;
        let big_r = invec(r, rows, n)?;
        let z = big_r.rows(cp, m);
        Ok(&self.w * z)
    }

    /// `H_i = R_CP M^(i) A_CP`, the `K O_s x K O_s` channel seen after CP removal.
    pub fn cp_channel(&self, chan: &ChannelMatrixSet, i: usize) -> Result<ComplexMatrix> {
        let m = self.cfg.block_len();
        let cp = self.cfg.cp_len;
        let (rows, cols) = chan.block_shape();
        if cols != m + cp || rows < m + cp {
            return Err(mismatch(format!("blocks with {} columns", m + cp), format!("{rows}x{cols}")));
        }
        let window = chan.window(i, cp, m);
        let mut h = window.columns(cp, m).into_owned();
        // CP samples are copies of the block tail
        for c in 0..cp {
            let mut dst = h.column_mut(m - cp + c);
            dst += window.column(c);
        }
        Ok(h)
    }

    /// `W H_i W^H` for every symbol: the `K x K` frequency-time channel matrices.
    pub fn ft_channels(&self, chan: &ChannelMatrixSet) -> Result<Vec<ComplexMatrix>> {
        if chan.symbols() != self.cfg.symbols {
            return Err(mismatch(format!("{} symbols", self.cfg.symbols), format!("{}", chan.symbols())));
        }
        (0..self.cfg.symbols)
            .map(|i| Ok(&self.w * self.cp_channel(chan, i)? * &self.w_h))
            .collect()
    }

    pub fn check_channel(&self, chan: &ChannelMatrixSet) -> Result<()> {
        let (_, cols) = chan.block_shape();
        if cols != self.tx_block() || chan.symbols() != self.cfg.symbols {
            return Err(mismatch(
                format!("{} blocks of {} columns", self.cfg.symbols, self.tx_block()),
                format!("{} blocks of {} columns", chan.symbols(), cols),
            ));
        }
        if self.cfg.cp_len + 1 < chan.span() {
            log::debug!(
                "cyclic prefix of {} samples shorter than channel memory {}: inter-carrier leakage is part of the model",
                self.cfg.cp_len,
                chan.span() - 1
            );
        }
        Ok(())
    }
}

/// OTFS modem for one configuration.
#[derive(Debug, Clone)]
pub struct OtfsModem {
    core: OfdmCore,
    sym: Symplectic,
}

impl OtfsModem {
    pub fn new(cfg: &ModemConfig) -> Result<Self> {
        Ok(OtfsModem {
            core: OfdmCore::new(cfg)?,
            sym: Symplectic::new(cfg.subcarriers, cfg.symbols)?,
        })
    }

    pub fn config(&self) -> &ModemConfig {
        &self.core.cfg
    }

    pub fn core(&self) -> &OfdmCore {
        &self.core
    }

    pub fn symplectic(&self) -> &Symplectic {
        &self.sym
    }

    /// `s = vec(A_CP W^H F_K X^DD F_N^H)`.
    pub fn modulate(&self, x_dd: &ComplexMatrix) -> Result<Vec<Complex64>> {
        self.core.modulate_ft(&self.sym.isfft(x_dd)?)
    }

    /// `r = sqrt(P_T) M s + w`.
    pub fn apply_channel(&self, s: &[Complex64], chan: &ChannelMatrixSet, noise_var: f64, seed: u64) -> Result<Vec<Complex64>> {
        self.core.check_channel(chan)?;
        chan.transmit(s, self.core.cfg.tx_power, noise_var, seed)
    }

    /// `Y^DD = F_K^H W R_CP invec(r) F_N`.
    pub fn demodulate(&self, r: &[Complex64]) -> Result<ComplexMatrix> {
        self.sym.sfft(&self.core.demodulate_ft(r)?)
    }

    /// Dense `Psi` with block `(n, n')` equal to
    /// `sqrt(P_T)/N * sum_i B_i exp(-j 2 pi i (n - n') / N)`, `B_i = F_K^H W H_i W^H F_K`.
    pub fn effective_channel(&self, chan: &ChannelMatrixSet) -> Result<EffectiveChannel> {
        self.core.check_channel(chan)?;
        let cfg = &self.core.cfg;
        let (k, n) = (cfg.subcarriers, cfg.symbols);
        let fk = self.sym.fk();
        let fk_h = fk.adjoint();
        let dd_blocks: Vec<ComplexMatrix> = self
            .core
            .ft_channels(chan)?
            .into_iter()
            .map(|t| &fk_h * t * fk)
            .collect();
        let amp = cfg.tx_power.sqrt() / n as f64;
        // the block only depends on (n - n') mod N
        let shifted: Vec<ComplexMatrix> = (0..n)
            .map(|delta| {
                dd_blocks
                    .iter()
                    .enumerate()
                    .fold(ComplexMatrix::zeros(k, k), |acc, (i, b)| {
                        acc + b * (transforms::cis2pi(-(((i * delta) % n) as f64) / n as f64) * amp)
                    })
            })
            .collect();
        let mut psi = ComplexMatrix::zeros(k * n, k * n);
        for row in 0..n {
            for col in 0..n {
                psi.view_mut((row * k, col * k), (k, k))
                    .copy_from(&shifted[(row + n - col) % n]);
            }
        }
        if cfg.tx_guard > 0 {
            psi = restrict_dd_input(&psi, &self.sym, cfg);
        }
        Ok(EffectiveChannel {
            matrix: psi,
            tx_power: cfg.tx_power,
        })
    }
}

pub fn otfs_modulate(x_dd: &ComplexMatrix, cfg: &ModemConfig) -> Result<Vec<Complex64>> {
    OtfsModem::new(cfg)?.modulate(x_dd)
}

pub fn otfs_apply_channel(
    s: &[Complex64],
    chan: &ChannelMatrixSet,
    cfg: &ModemConfig,
    noise_var: f64,
    seed: u64,
) -> Result<Vec<Complex64>> {
    OtfsModem::new(cfg)?.apply_channel(s, chan, noise_var, seed)
}

pub fn otfs_demodulate(r: &[Complex64], cfg: &ModemConfig) -> Result<ComplexMatrix> {
    OtfsModem::new(cfg)?.demodulate(r)
}

pub fn otfs_effective_channel(chan: &ChannelMatrixSet, cfg: &ModemConfig) -> Result<EffectiveChannel> {
    OtfsModem::new(cfg)?.effective_channel(chan)
}

/// Noiseless chain response: `demodulate(channel(modulate(x)))`, vectorized.
pub fn otfs_chain(modem: &OtfsModem, chan: &ChannelMatrixSet, x_dd: &ComplexMatrix) -> Result<DVector<Complex64>> {
    let s = modem.modulate(x_dd)?;
    let r = modem.apply_channel(&s, chan, 0.0, 0)?;
    Ok(vec(&modem.demodulate(&r)?))
}
