//! Linear time-varying multipath channel.
//!
//! Paths follow the EVA power-delay profile with one Jakes Doppler shift per
//! path. A realization is materialized into per-symbol tap arrays
//! `h[i][(r, l)]`, where tap `l` (0-based) carries lag `l` samples for the
//! output sample `r`, and from those into banded block channel matrices.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::{DopplerClock, ModemConfig, PulseShape};
use crate::error::{mismatch, Error, Result};
use crate::transforms::ComplexMatrix;

/// EVA path delays in ns.
pub const EVA_DELAYS_NS: [f64; 9] = [0.0, 30.0, 150.0, 310.0, 370.0, 710.0, 1090.0, 1730.0, 2510.0];
/// EVA relative path powers in dB.
pub const EVA_POWERS_DB: [f64; 9] = [0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9];

const RC_ROLLOFF: f64 = 0.25;
const RC_HALF_SUPPORT: usize = 4;

/// Multipath parameters of one channel draw.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSet {
    pub gains: Vec<Complex64>,
    /// Seconds, ascending.
    pub delays: Vec<f64>,
    /// Hz.
    pub dopplers: Vec<f64>,
    pub max_doppler: f64,
}

impl PathSet {
    pub fn new(gains: Vec<Complex64>, delays: Vec<f64>, dopplers: Vec<f64>) -> Result<Self> {
        if gains.len() != delays.len() || gains.len() != dopplers.len() || gains.is_empty() {
            return Err(mismatch("equal non-empty path arrays", format!(
                "{} gains, {} delays, {} dopplers",
                gains.len(),
                delays.len(),
                dopplers.len()
            )));
        }
        if delays.iter().any(|&d| !(d >= 0.0)) || delays.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidConfig("path delays must be non-negative and ascending".into()));
        }
        let max_doppler = dopplers.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        Ok(PathSet {
            gains,
            delays,
            dopplers,
            max_doppler,
        })
    }

    /// Single zero-delay unit path without Doppler.
    pub fn ideal() -> Self {
        PathSet {
            gains: vec![Complex64::new(1.0, 0.0)],
            delays: vec![0.0],
            dopplers: vec![0.0],
            max_doppler: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.gains.iter().map(|g| g.norm_sqr()).sum()
    }
}

/// Draws an EVA realization: Rayleigh path gains scaled to the unit-power
/// profile and Doppler shifts `nu_max cos(theta)` with `theta ~ U[-pi, pi]`.
pub fn sample_eva_paths(seed: u64, v_max: f64, carrier_freq: f64) -> Result<PathSet> {
    if !(v_max >= 0.0) || !(carrier_freq > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "speed {v_max} m/s and carrier {carrier_freq} Hz must be non-negative / positive"
        )));
    }
    let nu_max = carrier_freq * v_max / crate::config::SPEED_OF_LIGHT;
    let linear: Vec<f64> = EVA_POWERS_DB.iter().map(|p| 10f64.powf(p / 10.0)).collect();
    let total: f64 = linear.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gains = Vec::with_capacity(linear.len());
    let mut dopplers = Vec::with_capacity(linear.len());
    for p in &linear {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        gains.push(Complex64::new(re, im) * (p / total / 2.0).sqrt());
        let theta = rng.random_range(-PI..PI);
        dopplers.push(nu_max * theta.cos());
    }
    Ok(PathSet {
        gains,
        delays: EVA_DELAYS_NS.iter().map(|d| d * 1e-9).collect(),
        dopplers,
        max_doppler: nu_max,
    })
}

fn raised_cosine(x: f64) -> f64 {
    let sinc = |v: f64| if v.abs() < 1e-12 { 1.0 } else { (PI * v).sin() / (PI * v) };
    let denom = 1.0 - (2.0 * RC_ROLLOFF * x).powi(2);
    if denom.abs() < 1e-10 {
        PI / 4.0 * sinc(1.0 / (2.0 * RC_ROLLOFF))
    } else {
        sinc(x) * (PI * RC_ROLLOFF * x).cos() / denom
    }
}

fn pulse_half_support(pulse: PulseShape) -> usize {
    match pulse {
        PulseShape::Ideal => 0,
        PulseShape::RootRaisedCosine => RC_HALF_SUPPORT,
    }
}

/// Value of the combined pulse at tap `lag` for a path delayed by `delay` (seconds).
fn pulse_at(pulse: PulseShape, lag: usize, delay: f64, ts: f64) -> f64 {
    match pulse {
        PulseShape::Ideal => {
            if lag as f64 == (delay / ts).round() {
                1.0
            } else {
                0.0
            }
        }
        PulseShape::RootRaisedCosine => {
            // taps are shifted by the half support so precursors stay causal
            let x = lag as f64 - RC_HALF_SUPPORT as f64 - delay / ts;
            if x.abs() <= RC_HALF_SUPPORT as f64 {
                raised_cosine(x)
            } else {
                0.0
            }
        }
    }
}

/// Number of taps needed to cover every path of `paths` with the configured pulse.
pub fn channel_span(paths: &PathSet, cfg: &ModemConfig) -> usize {
    let ts = cfg.sample_period();
    let tau_max = paths.delays.iter().cloned().fold(0.0, f64::max);
    let reach = (tau_max / ts - 1e-9).ceil().max(0.0) as usize;
    reach + 2 * pulse_half_support(cfg.pulse) + 1
}

/// Per-symbol tap arrays of one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LtvChannelRealization {
    /// `taps[i]` is `rows x span`: entry `(r, l)` is the gain at lag `l` for output sample `r`.
    pub taps: Vec<ComplexMatrix>,
    pub span: usize,
    pub sample_period: f64,
}

impl LtvChannelRealization {
    pub fn symbols(&self) -> usize {
        self.taps.len()
    }

    pub fn rows(&self) -> usize {
        self.taps.first().map_or(0, |t| t.nrows())
    }

    pub fn is_finite(&self) -> bool {
        self.taps.iter().all(crate::transforms::is_finite)
    }

    /// Writes the realization as text: a header line, then one line
    /// `i l re im re im ...` per (symbol, lag) listing the tap over all rows.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# ddmod-channel v1 symbols={} rows={} span={} sample_period={:e}",
            self.symbols(),
            self.rows(),
            self.span,
            self.sample_period
        )?;
        let mut line = String::new();
        for (i, t) in self.taps.iter().enumerate() {
            for l in 0..self.span {
                line.clear();
                write!(line, "{i} {l}").unwrap();
                for r in 0..t.nrows() {
                    let z = t[(r, l)];
                    write!(line, " {:e} {:e}", z.re, z.im).unwrap();
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "empty channel file".into(),
        })?;
        let header = header?;
        let field = |name: &str| -> Result<&str> {
            header
                .split_whitespace()
                .find_map(|tok| tok.strip_prefix(name).and_then(|v| v.strip_prefix('=')))
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("missing header field {name}"),
                })
        };
        let parse_err = |line: usize, e: &dyn std::fmt::Display| Error::Parse {
            line,
            message: e.to_string(),
        };
        let symbols: usize = field("symbols")?.parse().map_err(|e| parse_err(1, &e))?;
        let rows: usize = field("rows")?.parse().map_err(|e| parse_err(1, &e))?;
        let span: usize = field("span")?.parse().map_err(|e| parse_err(1, &e))?;
        let sample_period: f64 = field("sample_period")?.parse().map_err(|e| parse_err(1, &e))?;
        let mut taps = vec![DMatrix::zeros(rows, span); symbols];
        let mut seen = 0usize;
        for (idx, line) in lines {
            let line = line?;
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let mut tok = line.split_whitespace();
            let mut next_usize = || -> Result<usize> {
                tok.next()
                    .ok_or_else(|| parse_err(lineno, &"truncated line"))?
                    .parse::<usize>()
                    .map_err(|e| parse_err(lineno, &e))
            };
            let i = next_usize()?;
            let l = next_usize()?;
            if i >= symbols || l >= span {
                return Err(parse_err(lineno, &format!("index ({i}, {l}) out of range")));
            }
            let vals: Vec<f64> = tok
                .map(|t| t.parse::<f64>().map_err(|e| parse_err(lineno, &e)))
                .collect::<Result<_>>()?;
            if vals.len() != 2 * rows {
                return Err(parse_err(lineno, &format!("expected {} values, got {}", 2 * rows, vals.len())));
            }
            for r in 0..rows {
                taps[i][(r, l)] = Complex64::new(vals[2 * r], vals[2 * r + 1]);
            }
            seen += 1;
        }
        if seen != symbols * span {
            return Err(Error::Parse {
                line: 0,
                message: format!("expected {} tap lines, found {seen}", symbols * span),
            });
        }
        Ok(LtvChannelRealization {
            taps,
            span,
            sample_period,
        })
    }
}

/// Materializes tap arrays for symbols whose blocks carry `block_len` input samples.
///
/// Every symbol gets `block_len + span - 1` output rows. The Doppler phase of
/// tap `l` at output `r` of symbol `i` (1-based) is evaluated at
/// `(l + r + offset_i) Ts - Ts/2` where `offset_i = i - 1` for the literal
/// clock and `(i - 1) * block_len` for the absolute one.
pub fn materialize_taps(paths: &PathSet, cfg: &ModemConfig, block_len: usize) -> Result<LtvChannelRealization> {
    materialize_taps_with_span(paths, cfg, block_len, channel_span(paths, cfg))
}

pub fn materialize_taps_with_span(
    paths: &PathSet,
    cfg: &ModemConfig,
    block_len: usize,
    span: usize,
) -> Result<LtvChannelRealization> {
    if block_len == 0 || span == 0 {
        return Err(Error::InvalidSize("block length and span must be >= 1".into()));
    }
    let ts = cfg.sample_period();
    let needed = channel_span(paths, cfg);
    if needed > span {
        let delay = paths.delays.iter().cloned().fold(0.0, f64::max);
        return Err(Error::DelayExceedsSpan {
            delay_s: delay,
            lag: needed - 1,
            span,
        });
    }
    let rows = block_len + span - 1;
    let stride = match cfg.doppler_clock {
        DopplerClock::Literal => 1.0,
        DopplerClock::Absolute => block_len as f64,
    };
    // pulse weight per (path, lag) does not depend on r or i
    let weights: Vec<Vec<f64>> = paths
        .delays
        .iter()
        .map(|&d| (0..span).map(|l| pulse_at(cfg.pulse, l, d, ts)).collect())
        .collect();
    let taps = (0..cfg.symbols)
        .map(|i| {
            let mut m = ComplexMatrix::zeros(rows, span);
            for p in 0..paths.len() {
                let nu = paths.dopplers[p];
                let h = paths.gains[p];
                for (l, &w) in weights[p].iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    for r in 0..rows {
                        let t = (l + 1) as f64 + (r + 1) as f64 + i as f64 * stride;
                        let phase = 2.0 * PI * nu * (t * ts - ts / 2.0);
                        m[(r, l)] += h * w * Complex64::from_polar(1.0, phase);
                    }
                }
            }
            m
        })
        .collect();
    Ok(LtvChannelRealization {
        taps,
        span,
        sample_period: ts,
    })
}

/// Banded per-symbol channel matrices `M^(i)` with `M(r, c) = h[i][(r, r - c)]`
/// for `0 <= r - c < span`. Stored as taps; dense blocks are built on demand.
#[derive(Debug, Clone)]
pub struct ChannelMatrixSet {
    taps: Vec<ComplexMatrix>,
    rows: usize,
    cols: usize,
    span: usize,
}

/// Builds the channel matrices for a chain with (`with_cp`) or without a cyclic prefix.
pub fn channel_matrices(real: &LtvChannelRealization, cfg: &ModemConfig, with_cp: bool) -> Result<ChannelMatrixSet> {
    let cols = cfg.block_len() + if with_cp { cfg.cp_len } else { 0 };
    let rows = cols + real.span - 1;
    if real.symbols() != cfg.symbols {
        return Err(mismatch(format!("{} symbols", cfg.symbols), format!("{}", real.symbols())));
    }
    if real.rows() < rows {
        return Err(mismatch(format!(">= {rows} tap rows"), format!("{}", real.rows())));
    }
    Ok(ChannelMatrixSet {
        taps: real.taps.clone(),
        rows,
        cols,
        span: real.span,
    })
}

impl ChannelMatrixSet {
    pub fn symbols(&self) -> usize {
        self.taps.len()
    }

    /// `(rows, cols)` of each block.
    pub fn block_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn span(&self) -> usize {
        self.span
    }

    #[inline]
    pub fn entry(&self, i: usize, r: usize, c: usize) -> Complex64 {
        if r >= c && r - c < self.span {
            self.taps[i][(r, r - c)]
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    /// Rows `first .. first + count` of `M^(i)`.
    pub fn window(&self, i: usize, first: usize, count: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(count, self.cols, |r, c| self.entry(i, first + r, c))
    }

    pub fn block(&self, i: usize) -> ComplexMatrix {
        self.window(i, 0, self.rows)
    }

    pub fn block_diagonal(&self) -> ComplexMatrix {
        let n = self.symbols();
        let mut out = ComplexMatrix::zeros(n * self.rows, n * self.cols);
        for i in 0..n {
            out.view_mut((i * self.rows, i * self.cols), (self.rows, self.cols))
                .copy_from(&self.block(i));
        }
        out
    }

    /// `sqrt(P_T) blkdiag(M^(i)) s + w` with circularly-symmetric Gaussian noise
    /// of per-sample variance `noise_var` drawn from `seed`.
    pub fn transmit(&self, s: &[Complex64], tx_power: f64, noise_var: f64, seed: u64) -> Result<Vec<Complex64>> {
        let n = self.symbols();
        if s.len() != n * self.cols {
            return Err(mismatch(format!("{} samples", n * self.cols), format!("{}", s.len())));
        }
        if !(tx_power >= 0.0) || !(noise_var >= 0.0) {
            return Err(Error::InvalidConfig("transmit power and noise variance must be >= 0".into()));
        }
        let amp = tx_power.sqrt();
        let mut out = Vec::with_capacity(n * self.rows);
        for (i, block) in s.chunks(self.cols).enumerate() {
            out.extend(self.apply_block(i, block)?.into_iter().map(|z| z * amp));
        }
        add_awgn(&mut out, noise_var, seed);
        Ok(out)
    }

    /// `M^(i) x` as a time-varying convolution.
    pub fn apply_block(&self, i: usize, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.cols {
            return Err(mismatch(format!("{} samples", self.cols), format!("{}", x.len())));
        }
        let t = &self.taps[i];
        Ok((0..self.rows)
            .map(|r| {
                let lo = r.saturating_sub(self.span - 1);
                let hi = r.min(self.cols - 1);
                (lo..=hi).map(|c| t[(r, r - c)] * x[c]).sum()
            })
            .collect())
    }
}

/// Adds complex white Gaussian noise of variance `noise_var` per sample.
pub fn add_awgn(samples: &mut [Complex64], noise_var: f64, seed: u64) {
    if noise_var == 0.0 {
        return;
    }
    let sigma = (noise_var / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for z in samples.iter_mut() {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        *z += Complex64::new(re, im) * sigma;
    }
}
