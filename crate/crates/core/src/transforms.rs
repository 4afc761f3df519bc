//! Matrix and window builders shared by every transceiver chain.
//!
//! All matrices are dense and column-major, so `vec(X)` of a `K x N` grid
//! places entry `(k, n)` at index `n * K + k`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::config::{FilterNorm, ModemConfig};
use crate::error::{mismatch, Error, Result};

pub type ComplexMatrix = DMatrix<Complex64>;
pub type ComplexVector = DVector<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// `exp(j * 2 * pi * x)`.
#[inline]
pub(crate) fn cis2pi(x: f64) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * x)
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Column-stacking vectorization.
pub fn vec(m: &ComplexMatrix) -> ComplexVector {
    ComplexVector::from_column_slice(m.as_slice())
}

/// Inverse of [`vec`].
pub fn invec(v: &[Complex64], rows: usize, cols: usize) -> Result<ComplexMatrix> {
    if v.len() != rows * cols {
        return Err(mismatch(format!("{} samples", rows * cols), format!("{}", v.len())));
    }
    Ok(ComplexMatrix::from_column_slice(rows, cols, v))
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = ComplexMatrix::zeros(ar * br, ac * bc);
    for j in 0..ac {
        for i in 0..ar {
            let s = a[(i, j)];
            if s == ZERO {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * s));
        }
    }
    out
}

/// Unitary `n x n` DFT matrix with entry `(a, b) = exp(-j 2 pi a b / n) / sqrt(n)`.
pub fn dft_matrix(n: usize) -> Result<ComplexMatrix> {
    if n == 0 {
        return Err(Error::InvalidSize("DFT size must be >= 1".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    Ok(ComplexMatrix::from_fn(n, n, |a, b| {
        // reduce the exponent modulo n to keep the phase argument small
        cis2pi(-(((a * b) % n) as f64) / n as f64) * scale
    }))
}

/// `K x (K O_s)` oversampled DFT. Row `l` (0-based) is the subcarrier at
/// normalized frequency `l - K/2`, so the grid is centered on DC.
pub fn oversampled_dft(k: usize, os: usize) -> Result<ComplexMatrix> {
    if k < 2 || k % 2 != 0 {
        return Err(Error::InvalidSize(format!("K = {k} must be even and >= 2")));
    }
    if os == 0 {
        return Err(Error::InvalidSize("oversampling factor must be >= 1".into()));
    }
    let m = k * os;
    let scale = 1.0 / (m as f64).sqrt();
    let half = (k / 2) as i64;
    Ok(ComplexMatrix::from_fn(k, m, |l, col| {
        let freq = l as i64 - half;
        let phase = (col as i64 * freq).rem_euclid(m as i64);
        cis2pi(-(phase as f64) / m as f64) * scale
    }))
}

/// Cached DFT pair for the symplectic transforms of a `K x N` grid.
#[derive(Debug, Clone)]
pub struct Symplectic {
    fk: ComplexMatrix,
    fk_h: ComplexMatrix,
    fn_: ComplexMatrix,
    fn_h: ComplexMatrix,
}

impl Symplectic {
    pub fn new(k: usize, n: usize) -> Result<Self> {
        let fk = dft_matrix(k)?;
        let fn_ = dft_matrix(n)?;
        Ok(Symplectic {
            fk_h: fk.adjoint(),
            fn_h: fn_.adjoint(),
            fk,
            fn_,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.fk.nrows(), self.fn_.nrows())
    }

    pub fn fk(&self) -> &ComplexMatrix {
        &self.fk
    }

    pub fn fn_(&self) -> &ComplexMatrix {
        &self.fn_
    }

    fn check(&self, x: &ComplexMatrix) -> Result<()> {
        let (k, n) = self.dims();
        if x.shape() != (k, n) {
            return Err(mismatch(format!("{k}x{n} grid"), format!("{}x{}", x.nrows(), x.ncols())));
        }
        Ok(())
    }

    /// `F_K X F_N^H`: delay-Doppler to frequency-time.
    pub fn isfft(&self, x_dd: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check(x_dd)?;
        Ok(&self.fk * x_dd * &self.fn_h)
    }

    /// `F_K^H Y F_N`: frequency-time to delay-Doppler.
    pub fn sfft(&self, y_ft: &ComplexMatrix) -> Result<ComplexMatrix> {
        self.check(y_ft)?;
        Ok(&self.fk_h * y_ft * &self.fn_)
    }

    /// `F_N^* ⊗ F_K`, mapping `vec(X^DD)` to `vec(X^FT)`.
    pub fn kron_operator(&self) -> ComplexMatrix {
        kron(&self.fn_.conjugate(), &self.fk)
    }
}

pub fn isfft(x_dd: &ComplexMatrix) -> Result<ComplexMatrix> {
    Symplectic::new(x_dd.nrows(), x_dd.ncols())?.isfft(x_dd)
}

pub fn sfft(y_ft: &ComplexMatrix) -> Result<ComplexMatrix> {
    Symplectic::new(y_ft.nrows(), y_ft.ncols())?.sfft(y_ft)
}

/// Real, symmetric prototype filter for the UFMC subbands.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    pub taps: Vec<f64>,
    pub atten_db: f64,
    /// Factor applied to the peak-normalized window to reach the requested normalization.
    pub scale: f64,
}

impl PrototypeFilter {
    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// Single unit tap: no filtering.
    pub fn identity() -> Self {
        PrototypeFilter {
            taps: vec![1.0],
            atten_db: f64::INFINITY,
            scale: 1.0,
        }
    }

    /// Builds the filter configured by `cfg`; `L = 1` yields [`PrototypeFilter::identity`].
    pub fn for_config(cfg: &ModemConfig) -> Result<Self> {
        if cfg.filter_len == 1 {
            return Ok(Self::identity());
        }
        chebyshev_window(cfg.filter_len, cfg.filter_atten_db, cfg.filter_norm)
    }

    /// Taps shifted to the center of subband `i`.
    pub fn modulated(&self, subband: usize, cfg: &ModemConfig) -> Vec<Complex64> {
        let shift = subband_center(subband, cfg);
        let m = cfg.block_len() as f64;
        self.taps
            .iter()
            .enumerate()
            .map(|(l, &g)| cis2pi(shift * l as f64 / m) * g)
            .collect()
    }
}

/// Normalized center frequency `(D-1)/2 + iD - K/2` of subband `i`, in subcarrier units.
pub fn subband_center(subband: usize, cfg: &ModemConfig) -> f64 {
    let d = cfg.subband_size as f64;
    (d - 1.0) / 2.0 + subband as f64 * d - cfg.subcarriers as f64 / 2.0
}

/// Dolph-Chebyshev window of length `len` with side lobes `atten_db` below the main lobe.
///
/// Samples the Chebyshev polynomial `T_{L-1}(x0 cos(pi k / L))` on `L` frequency
/// points, inverts with a direct DFT and mirrors the real part.
pub fn chebyshev_window(len: usize, atten_db: f64, norm: FilterNorm) -> Result<PrototypeFilter> {
    if len < 2 {
        return Err(Error::InvalidSize(format!("window length {len} must be >= 2")));
    }
    if !(atten_db > 0.0) || !atten_db.is_finite() {
        return Err(Error::InvalidAttenuation(atten_db));
    }
    let order = (len - 1) as f64;
    let ripple = 10f64.powf(atten_db / 20.0);
    let x0 = (ripple.acosh() / order).cosh();

    let cheb = |x: f64| -> f64 {
        if x > 1.0 {
            (order * x.acosh()).cosh()
        } else if x < -1.0 {
            let sign = if len % 2 == 1 { 1.0 } else { -1.0 };
            sign * (order * (-x).acosh()).cosh()
        } else {
            (order * x.acos()).cos()
        }
    };

    let spectrum: Vec<Complex64> = (0..len)
        .map(|k| {
            let p = cheb(x0 * (PI * k as f64 / len as f64).cos());
            if len % 2 == 0 {
                // half-sample shift centers the even-length window
                Complex64::from_polar(p, PI * k as f64 / len as f64)
            } else {
                Complex64::new(p, 0.0)
            }
        })
        .collect();
    let time: Vec<f64> = (0..len)
        .map(|n| {
            spectrum
                .iter()
                .enumerate()
                .map(|(k, &p)| p * cis2pi(-(((k * n) % len) as f64) / len as f64))
                .sum::<Complex64>()
                .re
        })
        .collect();

    let mut taps = Vec::with_capacity(len);
    if len % 2 == 1 {
        let half = (len + 1) / 2;
        taps.extend(time[1..half].iter().rev());
        taps.extend(&time[..half]);
    } else {
        let half = len / 2 + 1;
        taps.extend(time[1..half].iter().rev());
        taps.extend(&time[1..half]);
    }
    // exact symmetry
    for l in 0..len / 2 {
        let avg = 0.5 * (taps[l] + taps[len - 1 - l]);
        taps[l] = avg;
        taps[len - 1 - l] = avg;
    }
    let peak = taps.iter().cloned().fold(f64::MIN, f64::max);
    taps.iter_mut().for_each(|t| *t /= peak);

    let scale = match norm {
        FilterNorm::UnitDcGain => 1.0 / taps.iter().sum::<f64>(),
        FilterNorm::UnitEnergy => 1.0 / taps.iter().map(|t| t * t).sum::<f64>().sqrt(),
    };
    taps.iter_mut().for_each(|t| *t *= scale);
    Ok(PrototypeFilter {
        taps,
        atten_db,
        scale,
    })
}

/// Diagonal 0/1 matrix keeping subcarriers `iD .. (i+1)D` of subband `i`.
pub fn selection_matrix(subband: usize, subbands: usize, subband_size: usize) -> Result<ComplexMatrix> {
    if subband >= subbands {
        return Err(Error::IndexOutOfRange {
            index: subband,
            bound: subbands,
        });
    }
    let k = subbands * subband_size;
    let lo = subband * subband_size;
    let hi = lo + subband_size;
    Ok(ComplexMatrix::from_fn(k, k, |r, c| {
        if r == c && (lo..hi).contains(&r) {
            ONE
        } else {
            ZERO
        }
    }))
}

/// Linear convolution, output length `x.len() + h.len() - 1`.
pub fn convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    if x.is_empty() || h.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; x.len() + h.len() - 1];
    for (i, &xi) in x.iter().enumerate() {
        if xi == ZERO {
            continue;
        }
        for (j, &hj) in h.iter().enumerate() {
            out[i + j] += xi * hj;
        }
    }
    out
}

/// `(K O_s + L - 1) x (K O_s)` Toeplitz matrix convolving with the filter tuned to subband `i`.
pub fn subband_conv_matrix(filter: &PrototypeFilter, subband: usize, cfg: &ModemConfig) -> Result<ComplexMatrix> {
    let subbands = cfg.subbands();
    if subband >= subbands {
        return Err(Error::IndexOutOfRange {
            index: subband,
            bound: subbands,
        });
    }
    if filter.is_empty() {
        return Err(mismatch("non-empty filter", "0 taps"));
    }
    let taps = filter.modulated(subband, cfg);
    let m = cfg.block_len();
    let l = taps.len();
    Ok(ComplexMatrix::from_fn(m + l - 1, m, |r, c| {
        if r >= c && r - c < l {
            taps[r - c]
        } else {
            ZERO
        }
    }))
}

/// Composite per-symbol UFMC precoder `sum_i G_i W^H P_i`, of size `(K O_s + L - 1) x K`.
///
/// Column `k` is the oversampled subcarrier `k` convolved with the filter of
/// the subband that owns it.
pub fn ufmc_precoder(cfg: &ModemConfig, filter: &PrototypeFilter) -> Result<ComplexMatrix> {
    cfg.validate()?;
    if filter.is_empty() || filter.len() > cfg.block_len() + 1 {
        return Err(mismatch(
            format!("filter length in 1..={}", cfg.block_len() + 1),
            format!("{}", filter.len()),
        ));
    }
    let k = cfg.subcarriers;
    let m = cfg.block_len();
    let w = oversampled_dft(k, cfg.oversampling)?;
    let banks: Vec<Vec<Complex64>> = (0..cfg.subbands()).map(|i| filter.modulated(i, cfg)).collect();
    let rows = m + filter.len() - 1;
    let mut out = ComplexMatrix::zeros(rows, k);
    for col in 0..k {
        let carrier: Vec<Complex64> = (0..m).map(|t| w[(col, t)].conj()).collect();
        let filtered = convolve(&carrier, &banks[col / cfg.subband_size]);
        out.column_mut(col).copy_from_slice(&filtered);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn max_abs(m: &ComplexMatrix) -> f64 {
        m.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn dft_small_cases() {
        let f1 = dft_matrix(1).unwrap();
        assert_eq!(f1[(0, 0)], ONE);
        let f2 = dft_matrix(2).unwrap();
        let s = 1.0 / 2f64.sqrt();
        let want = [[s, s], [s, -s]];
        for r in 0..2 {
            for c in 0..2 {
                assert!((f2[(r, c)] - Complex64::new(want[r][c], 0.0)).norm() < 1e-15);
            }
        }
        assert!(matches!(dft_matrix(0), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn dft_is_unitary() {
        for n in [2, 8, 16, 128] {
            let f = dft_matrix(n).unwrap();
            let err = max_abs(&(&f * f.adjoint() - ComplexMatrix::identity(n, n)));
            assert!(err < 1e-12, "n={n} err={err}");
        }
    }

    #[test]
    fn oversampled_dft_rows_orthonormal() {
        for (k, os) in [(8, 4), (2, 1), (32, 4), (16, 10)] {
            let w = oversampled_dft(k, os).unwrap();
            let err = max_abs(&(&w * w.adjoint() - ComplexMatrix::identity(k, k)));
            assert!(err < 1e-12, "K={k} Os={os} err={err}");
            let mag = 1.0 / ((k * os) as f64).sqrt();
            assert!(w.iter().all(|z| (z.norm() - mag).abs() < 1e-14));
        }
    }

    #[test]
    fn oversampled_dft_k2_plain() {
        let w = oversampled_dft(2, 1).unwrap();
        let s = 1.0 / 2f64.sqrt();
        // row l=2 (1-based) has frequency 0
        assert!((w[(1, 0)] - Complex64::new(s, 0.0)).norm() < 1e-15);
        assert!((w[(1, 1)] - Complex64::new(s, 0.0)).norm() < 1e-15);
        // row l=1 has frequency -1: exp(+j pi m)
        assert!((w[(0, 1)] - Complex64::new(-s, 0.0)).norm() < 1e-15);
        assert!(oversampled_dft(3, 2).is_err());
        assert!(oversampled_dft(0, 2).is_err());
        assert!(oversampled_dft(4, 0).is_err());
    }

    #[test]
    fn symplectic_round_trip_and_zero() {
        let x = random_matrix(8, 4, 1);
        let sym = Symplectic::new(8, 4).unwrap();
        let back = sym.sfft(&sym.isfft(&x).unwrap()).unwrap();
        assert!(max_abs(&(back - &x)) < 1e-12);
        let zero = ComplexMatrix::zeros(8, 4);
        assert_eq!(max_abs(&sym.isfft(&zero).unwrap()), 0.0);
        assert_eq!(max_abs(&sym.sfft(&zero).unwrap()), 0.0);
        assert!(sym.isfft(&ComplexMatrix::zeros(4, 8)).is_err());
    }

    #[test]
    fn isfft_of_impulse_matches_double_sum() {
        let (k, n) = (8usize, 4usize);
        let mut x = ComplexMatrix::zeros(k, n);
        x[(0, 0)] = Complex64::new(((k * n) as f64).sqrt(), 0.0);
        let got = isfft(&x).unwrap();
        // X^FT(a, b) = sum_{p,q} F_K(a,p) X(p,q) conj(F_N(b,q))
        for a in 0..k {
            for b in 0..n {
                let mut acc = ZERO;
                for p in 0..k {
                    for q in 0..n {
                        let fk = cis2pi(-((a * p) as f64) / k as f64) / (k as f64).sqrt();
                        let fnc = cis2pi(((b * q) as f64) / n as f64) / (n as f64).sqrt();
                        acc += fk * x[(p, q)] * fnc;
                    }
                }
                assert!((got[(a, b)] - acc).norm() < 1e-12);
                assert!((got[(a, b)] - ONE).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn sfft_of_single_entry_is_outer_product() {
        let (k, n) = (8usize, 4usize);
        let (a0, b0) = (3usize, 2usize);
        let mut y = ComplexMatrix::zeros(k, n);
        y[(a0, b0)] = ONE;
        let got = sfft(&y).unwrap();
        for p in 0..k {
            for q in 0..n {
                let want = cis2pi(((a0 * p) as f64) / k as f64) / (k as f64).sqrt()
                    * cis2pi(-((b0 * q) as f64) / n as f64)
                    / (n as f64).sqrt();
                assert!((got[(p, q)] - want).norm() < 1e-12);
            }
        }
    }

    /// Side-lobe level in dB of a real FIR evaluated on a dense grid.
    fn sidelobe_level_db(taps: &[f64], grid: usize) -> f64 {
        let resp: Vec<f64> = (0..grid / 2)
            .map(|f| {
                let w = 2.0 * PI * f as f64 / grid as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for (n, &t) in taps.iter().enumerate() {
                    re += t * (w * n as f64).cos();
                    im -= t * (w * n as f64).sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect();
        let peak = resp[0];
        let mut edge = 1;
        while edge + 1 < resp.len() && resp[edge + 1] < resp[edge] {
            edge += 1;
        }
        let side = resp[edge..].iter().cloned().fold(0.0, f64::max);
        20.0 * (side / peak).log10()
    }

    #[test]
    fn chebyshev_sidelobes_hit_requested_level() {
        for (len, atten) in [(16, 60.0), (31, 40.0), (24, 80.0)] {
            let g = chebyshev_window(len, atten, FilterNorm::UnitDcGain).unwrap();
            let level = sidelobe_level_db(&g.taps, 4096);
            assert!((level + atten).abs() < 0.5, "L={len} A={atten} level={level}");
        }
    }

    #[test]
    fn chebyshev_symmetric_and_normalized() {
        for (len, atten) in [(2, 30.0), (5, 50.0), (16, 60.0), (60, 100.0), (61, 100.0)] {
            let g = chebyshev_window(len, atten, FilterNorm::UnitDcGain).unwrap();
            assert_eq!(g.len(), len);
            for l in 0..len {
                assert!((g.taps[l] - g.taps[len - 1 - l]).abs() < 1e-12);
            }
            assert!((g.taps.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let e = chebyshev_window(len, atten, FilterNorm::UnitEnergy).unwrap();
            assert!((e.taps.iter().map(|t| t * t).sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            chebyshev_window(16, 0.0, FilterNorm::UnitDcGain),
            Err(Error::InvalidAttenuation(_))
        ));
        assert!(chebyshev_window(1, 50.0, FilterNorm::UnitDcGain).is_err());
    }

    #[test]
    fn selection_matrices_partition_identity() {
        let (b, d) = (8, 16);
        let k = b * d;
        let ps: Vec<_> = (0..b).map(|i| selection_matrix(i, b, d).unwrap()).collect();
        let sum = ps.iter().fold(ComplexMatrix::zeros(k, k), |acc, p| acc + p);
        assert_eq!(max_abs(&(sum - ComplexMatrix::identity(k, k))), 0.0);
        for i in 0..b {
            for j in 0..b {
                let prod = &ps[i] * &ps[j];
                let want = if i == j { ps[i].clone() } else { ComplexMatrix::zeros(k, k) };
                assert_eq!(max_abs(&(prod - want)), 0.0);
            }
        }
        assert_eq!(
            selection_matrix(0, 1, 16).unwrap(),
            ComplexMatrix::identity(16, 16)
        );
        assert!(matches!(
            selection_matrix(8, 8, 16),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    fn small_cfg(k: usize, os: usize, d: usize, l: usize) -> ModemConfig {
        ModemConfig {
            subcarriers: k,
            oversampling: os,
            subband_size: d,
            filter_len: l,
            symbols: 4,
            cp_len: 0,
            ..ModemConfig::desk()
        }
    }

    #[test]
    fn conv_matrix_identity_for_unit_filter() {
        // K=2, D=1, subband 1 has center 0
        let cfg = small_cfg(2, 3, 1, 1);
        let g = subband_conv_matrix(&PrototypeFilter::identity(), 1, &cfg).unwrap();
        assert_eq!(g, ComplexMatrix::identity(6, 6));
    }

    #[test]
    fn conv_matrix_first_column_holds_taps() {
        let cfg = small_cfg(16, 2, 4, 5);
        let filt = PrototypeFilter::for_config(&cfg).unwrap();
        let g = subband_conv_matrix(&filt, 2, &cfg).unwrap();
        let taps = filt.modulated(2, &cfg);
        for r in 0..g.nrows() {
            let want = if r < 5 { taps[r] } else { ZERO };
            assert_eq!(g[(r, 0)], want);
        }
    }

    #[test]
    fn conv_matrix_matches_direct_convolution() {
        let cfg = small_cfg(16, 2, 4, 5);
        let filt = PrototypeFilter::for_config(&cfg).unwrap();
        let x = random_matrix(32, 1, 7);
        for i in 0..cfg.subbands() {
            let g = subband_conv_matrix(&filt, i, &cfg).unwrap();
            let got = &g * &x;
            // y[n] = sum_l g_{i,l} x[n - l]
            let taps = filt.modulated(i, &cfg);
            for n in 0..got.nrows() {
                let mut acc = ZERO;
                for (l, t) in taps.iter().enumerate() {
                    if n >= l && n - l < 32 {
                        acc += t * x[(n - l, 0)];
                    }
                }
                assert!((got[(n, 0)] - acc).norm() < 1e-12);
            }
        }
    }

    fn precoder_by_definition(cfg: &ModemConfig, filt: &PrototypeFilter) -> ComplexMatrix {
        let w_h = oversampled_dft(cfg.subcarriers, cfg.oversampling).unwrap().adjoint();
        let rows = cfg.block_len() + filt.len() - 1;
        (0..cfg.subbands()).fold(ComplexMatrix::zeros(rows, cfg.subcarriers), |acc, i| {
            let g = subband_conv_matrix(filt, i, cfg).unwrap();
            let p = selection_matrix(i, cfg.subbands(), cfg.subband_size).unwrap();
            acc + g * &w_h * p
        })
    }

    #[test]
    fn precoder_matches_subband_sum() {
        for (k, os, d, l) in [(16, 2, 4, 5), (8, 1, 2, 3), (16, 4, 16, 7)] {
            let cfg = small_cfg(k, os, d, l);
            let filt = PrototypeFilter::for_config(&cfg).unwrap();
            let fast = ufmc_precoder(&cfg, &filt).unwrap();
            let slow = precoder_by_definition(&cfg, &filt);
            assert!(max_abs(&(fast - slow)) < 1e-12);
        }
    }

    #[test]
    fn precoder_degenerates_to_ifft() {
        let cfg = small_cfg(8, 2, 8, 1);
        let p = ufmc_precoder(&cfg, &PrototypeFilter::identity()).unwrap();
        let w_h = oversampled_dft(8, 2).unwrap().adjoint();
        assert!(max_abs(&(p - w_h)) < 1e-15);
    }

    #[test]
    fn precoder_applied_to_column_matches_per_subband_chains() {
        let cfg = small_cfg(16, 2, 4, 5);
        let filt = PrototypeFilter::for_config(&cfg).unwrap();
        let p = ufmc_precoder(&cfg, &filt).unwrap();
        let x = random_matrix(16, 1, 3);
        let w_h = oversampled_dft(16, 2).unwrap().adjoint();
        let mut want = vec![ZERO; 32 + 4];
        for i in 0..cfg.subbands() {
            let mut sub = x.clone();
            for r in 0..16 {
                if r / 4 != i {
                    sub[(r, 0)] = ZERO;
                }
            }
            let time = &w_h * sub;
            let y = convolve(time.as_slice(), &filt.modulated(i, &cfg));
            for (a, b) in want.iter_mut().zip(y) {
                *a += b;
            }
        }
        let got = p * x;
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).norm() < 1e-12);
        }
    }

    #[test]
    fn kron_matches_vec_identity() {
        // vec(A X B) = (B^T ⊗ A) vec(X)
        let a = random_matrix(3, 3, 11);
        let x = random_matrix(3, 2, 12);
        let b = random_matrix(2, 2, 13);
        let lhs = vec(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vec(&x);
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
