//! DR-UFMC transceiver: ISFFT pre-processing followed by a subband-filtered
//! oversampled UFMC modulator with continuous-packet overlap and no cyclic
//! prefix, the matching receiver, and the effective channel `Psi~`.
//!
//! Each symbol produces `K O_s + L - 1` filtered samples. The `L - 1` tail
//! samples of symbol `n` are added onto the head of symbol `n + 1`, and the
//! tail of the last symbol is dropped, so a frame is exactly `K O_s N` samples.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::channel::ChannelMatrixSet;
use crate::config::ModemConfig;
use crate::error::{mismatch, Error, Result};
use crate::otfs::{null_edges, restrict_dd_input, EffectiveChannel};
use crate::transforms::{cis2pi, invec, oversampled_dft, ufmc_precoder, vec, ComplexMatrix, PrototypeFilter, Symplectic};

/// Per-symbol filtered output and the overlapped transmit matrix.
#[derive(Debug, Clone)]
pub struct UfmcSymbolBlock {
    /// `(K O_s + L - 1) x N`.
    pub filtered: ComplexMatrix,
    /// `K O_s x N`.
    pub overlapped: ComplexMatrix,
}

#[derive(Debug, Clone)]
pub struct DrUfmcModem {
    cfg: ModemConfig,
    sym: Symplectic,
    w: ComplexMatrix,
    filter: PrototypeFilter,
    precoder: ComplexMatrix,
}

impl DrUfmcModem {
    pub fn new(cfg: &ModemConfig) -> Result<Self> {
        cfg.validate()?;
        let filter = PrototypeFilter::for_config(cfg)?;
        let precoder = ufmc_precoder(cfg, &filter)?;
        Ok(DrUfmcModem {
            cfg: cfg.clone(),
            sym: Symplectic::new(cfg.subcarriers, cfg.symbols)?,
            w: oversampled_dft(cfg.subcarriers, cfg.oversampling)?,
            filter,
            precoder,
        })
    }

    pub fn config(&self) -> &ModemConfig {
        &self.cfg
    }

    pub fn filter(&self) -> &PrototypeFilter {
        &self.filter
    }

    /// `P_UFMC`, `(K O_s + L - 1) x K`.
    pub fn precoder(&self) -> &ComplexMatrix {
        &self.precoder
    }

    pub fn symplectic(&self) -> &Symplectic {
        &self.sym
    }

    fn tail(&self) -> usize {
        self.filter.len() - 1
    }

    /// Filters every column of `X^FT` and overlaps consecutive symbols.
    pub fn symbol_blocks(&self, x_ft: &ComplexMatrix) -> Result<UfmcSymbolBlock> {
        let (k, n) = (self.cfg.subcarriers, self.cfg.symbols);
        if x_ft.shape() != (k, n) {
            return Err(mismatch(format!("{k}x{n} grid"), format!("{}x{}", x_ft.nrows(), x_ft.ncols())));
        }
        let mut x = x_ft.clone();
        if self.cfg.tx_guard > 0 {
            null_edges(&mut x, self.cfg.tx_guard);
        }
        let filtered = &self.precoder * x;
        let m = self.cfg.block_len();
        let tail = self.tail();
        let mut overlapped = filtered.rows(0, m).into_owned();
        for col in 1..n {
            for row in 0..tail {
                overlapped[(row, col)] += filtered[(row + m, col - 1)];
            }
        }
        Ok(UfmcSymbolBlock { filtered, overlapped })
    }

    /// `s~ = vec(X^UFMC)` for a delay-Doppler grid.
    pub fn modulate(&self, x_dd: &ComplexMatrix) -> Result<Vec<Complex64>> {
        self.modulate_ft(&self.sym.isfft(x_dd)?)
    }

    pub fn modulate_ft(&self, x_ft: &ComplexMatrix) -> Result<Vec<Complex64>> {
        Ok(self.symbol_blocks(x_ft)?.overlapped.as_slice().to_vec())
    }

    /// `U_UFMC`: block-banded `K O_s N x K N` matrix with `P_UFMC` on block
    /// `(n, n)` and its last `L - 1` rows truncated off the final block.
    pub fn stacked_precoder(&self) -> ComplexMatrix {
        let (k, n) = (self.cfg.subcarriers, self.cfg.symbols);
        let m = self.cfg.block_len();
        let rows = m + self.tail();
        let mut full = ComplexMatrix::zeros(m * n + self.tail(), k * n);
        for b in 0..n {
            full.view_mut((b * m, b * k), (rows, k)).copy_from(&self.precoder);
        }
        full.rows(0, m * n).into_owned()
    }

    /// `U_UFMC (F_N^* ⊗ F_K)`: the whole transmitter as one matrix (ignores `tx_guard`).
    pub fn modulation_matrix(&self) -> ComplexMatrix {
        self.stacked_precoder() * self.sym.kron_operator()
    }

    pub fn check_channel(&self, chan: &ChannelMatrixSet) -> Result<()> {
        let (_, cols) = chan.block_shape();
        if cols != self.cfg.block_len() || chan.symbols() != self.cfg.symbols {
            return Err(mismatch(
                format!("{} blocks of {} columns", self.cfg.symbols, self.cfg.block_len()),
                format!("{} blocks of {} columns", chan.symbols(), cols),
            ));
        }
        Ok(())
    }

    /// `r~ = sqrt(P_T) M~ s~ + w~` with `(K O_s + L_ch - 1) x K O_s` blocks.
    pub fn apply_channel(&self, s: &[Complex64], chan: &ChannelMatrixSet, noise_var: f64, seed: u64) -> Result<Vec<Complex64>> {
        self.check_channel(chan)?;
        chan.transmit(s, self.cfg.tx_power, noise_var, seed)
    }

    /// Keeps the first `K O_s` samples of each received block, then oversampled FFT and SFFT.
    pub fn demodulate(&self, r: &[Complex64]) -> Result<ComplexMatrix> {
        self.sym.sfft(&self.demodulate_ft(r)?)
    }

    pub fn demodulate_ft(&self, r: &[Complex64]) -> Result<ComplexMatrix> {
        let n = self.cfg.symbols;
        let m = self.cfg.block_len();
        if r.is_empty() || r.len() % n != 0 || r.len() / n < m {
            return Err(mismatch(format!("N * rows with rows >= {m}"), format!("{} samples", r.len())));
        }
        let big_r = invec(r, r.len() / n, n)?;
        Ok(&self.w * big_r.rows(0, m))
    }

    /// `B~_n' = F_K^H W R_tail M~^(n')` for every symbol, `K x K O_s`.
    fn receive_blocks(&self, chan: &ChannelMatrixSet) -> Vec<ComplexMatrix> {
        let m = self.cfg.block_len();
        let front = self.sym.fk().adjoint() * &self.w;
        (0..self.cfg.symbols).map(|i| &front * chan.window(i, 0, m)).collect()
    }

    /// `Psi_UFMC` with entries `sqrt(P_T)/sqrt(N) B~_n'(k, k') exp(-j 2 pi n n' / N)`, `KN x K O_s N`.
    pub fn psi_ufmc(&self, chan: &ChannelMatrixSet) -> Result<ComplexMatrix> {
        self.check_channel(chan)?;
        let (k, n) = (self.cfg.subcarriers, self.cfg.symbols);
        let m = self.cfg.block_len();
        let amp = self.cfg.tx_power.sqrt() / (n as f64).sqrt();
        let blocks = self.receive_blocks(chan);
        let mut out = ComplexMatrix::zeros(k * n, m * n);
        for row in 0..n {
            for (col, b) in blocks.iter().enumerate() {
                let phase = cis2pi(-(((row * col) % n) as f64) / n as f64) * amp;
                out.view_mut((row * k, col * m), (k, m)).copy_from(&(b * phase));
            }
        }
        Ok(out)
    }

    /// Dense `Psi~ = Psi_UFMC U_UFMC (F_N^* ⊗ F_K)`.
    ///
    /// Evaluated per block: the transmit matrix has row-block `n'` equal to
    /// `F_N^*(n', :) ⊗ Q_head + F_N^*(n'-1, :) ⊗ Q_tail` with `Q = P_UFMC F_K`.
    pub fn effective_channel(&self, chan: &ChannelMatrixSet) -> Result<EffectiveChannel> {
        self.check_channel(chan)?;
        let (k, n) = (self.cfg.subcarriers, self.cfg.symbols);
        let m = self.cfg.block_len();
        let tail = self.tail();
        let q = &self.precoder * self.sym.fk();
        let q_head = q.rows(0, m).into_owned();
        let mut q_tail = ComplexMatrix::zeros(m, k);
        if tail > 0 {
            q_tail.rows_mut(0, tail).copy_from(&q.rows(m, tail));
        }
        let fn_conj = self.sym.fn_().conjugate();
        let amp = self.cfg.tx_power.sqrt() / (n as f64).sqrt();

        let blocks = self.receive_blocks(chan);
        let heads: Vec<ComplexMatrix> = blocks.iter().map(|b| b * &q_head).collect();
        let tails: Vec<ComplexMatrix> = blocks.iter().map(|b| b * &q_tail).collect();

        let mut psi = ComplexMatrix::zeros(k * n, k * n);
        for row in 0..n {
            for col in 0..n {
                let mut acc = ComplexMatrix::zeros(k, k);
                for sym in 0..n {
                    let phase = cis2pi(-(((row * sym) % n) as f64) / n as f64) * amp;
                    let mut coeff_head = fn_conj[(sym, col)] * phase;
                    if coeff_head != Complex64::new(0.0, 0.0) {
                        acc.zip_apply(&heads[sym], |a, h| *a += h * coeff_head);
                    }
                    if sym > 0 && tail > 0 {
                        coeff_head = fn_conj[(sym - 1, col)] * phase;
                        acc.zip_apply(&tails[sym], |a, t| *a += t * coeff_head);
                    }
                }
                psi.view_mut((row * k, col * k), (k, k)).copy_from(&acc);
            }
        }
        if self.cfg.tx_guard > 0 {
            psi = restrict_dd_input(&psi, &self.sym, &self.cfg);
        }
        Ok(EffectiveChannel {
            matrix: psi,
            tx_power: self.cfg.tx_power,
        })
    }
}

pub fn drufmc_modulate(x_dd: &ComplexMatrix, cfg: &ModemConfig) -> Result<Vec<Complex64>> {
    if cfg.subband_size == 0 || cfg.subcarriers % cfg.subband_size != 0 {
        return Err(Error::InvalidConfig(format!(
            "K = B*D violated: K = {}, D = {}",
            cfg.subcarriers, cfg.subband_size
        )));
    }
    DrUfmcModem::new(cfg)?.modulate(x_dd)
}

pub fn drufmc_apply_channel(
    s: &[Complex64],
    chan: &ChannelMatrixSet,
    cfg: &ModemConfig,
    noise_var: f64,
    seed: u64,
) -> Result<Vec<Complex64>> {
    DrUfmcModem::new(cfg)?.apply_channel(s, chan, noise_var, seed)
}

pub fn drufmc_demodulate(r: &[Complex64], cfg: &ModemConfig) -> Result<ComplexMatrix> {
    DrUfmcModem::new(cfg)?.demodulate(r)
}

pub fn drufmc_effective_channel(chan: &ChannelMatrixSet, cfg: &ModemConfig) -> Result<EffectiveChannel> {
    DrUfmcModem::new(cfg)?.effective_channel(chan)
}

/// Noiseless chain response, vectorized.
pub fn drufmc_chain(modem: &DrUfmcModem, chan: &ChannelMatrixSet, x_dd: &ComplexMatrix) -> Result<DVector<Complex64>> {
    let s = modem.modulate(x_dd)?;
    let r = modem.apply_channel(&s, chan, 0.0, 0)?;
    Ok(vec(&modem.demodulate(&r)?))
}
