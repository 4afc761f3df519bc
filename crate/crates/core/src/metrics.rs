//! Linear MMSE detection, per-bin SINR, net SINR and spectral efficiency,
//! normalized MSE, Welch PSD estimation and the guard-subcarrier search.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

use crate::error::{mismatch, Error, Result};
use crate::transforms::ComplexMatrix;

/// Linear SINR per (k, n) bin, stored at index `n * K + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrMap {
    pub values: Vec<f64>,
    pub subcarriers: usize,
    pub symbols: usize,
    /// Guard bins per edge.
    pub guard: usize,
}

impl SinrMap {
    pub fn new(values: Vec<f64>, subcarriers: usize, symbols: usize) -> Result<Self> {
        if values.len() != subcarriers * symbols {
            return Err(mismatch(format!("{} bins", subcarriers * symbols), format!("{}", values.len())));
        }
        if values.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidConfig("SINR values must be non-negative".into()));
        }
        Ok(SinrMap {
            values,
            subcarriers,
            symbols,
            guard: 0,
        })
    }

    pub fn get(&self, k: usize, n: usize) -> f64 {
        self.values[n * self.subcarriers + k]
    }

    pub fn is_guard(&self, k: usize) -> bool {
        k < self.guard || k >= self.subcarriers - self.guard
    }

    pub fn with_guard(mut self, guard: usize) -> Result<Self> {
        check_guard(guard, self.subcarriers)?;
        self.guard = guard;
        Ok(self)
    }

    fn active(&self, guard: usize) -> impl Iterator<Item = f64> + '_ {
        let k = self.subcarriers;
        self.values
            .iter()
            .enumerate()
            .filter(move |(j, _)| {
                let sc = j % k;
                sc >= guard && sc < k - guard
            })
            .map(|(_, v)| *v)
    }
}

fn check_guard(guard: usize, subcarriers: usize) -> Result<()> {
    if 2 * guard >= subcarriers {
        return Err(Error::InvalidGuard { guard, subcarriers });
    }
    Ok(())
}

fn check_square(c: &ComplexMatrix) -> Result<()> {
    if c.nrows() != c.ncols() || c.nrows() == 0 {
        return Err(mismatch("non-empty square matrix", format!("{}x{}", c.nrows(), c.ncols())));
    }
    Ok(())
}

/// MMSE filters `D = (C C^H + sigma^2 I)^-1 C`; column `j` is `d_j`.
pub fn mmse_filters(c: &ComplexMatrix, noise_var: f64) -> Result<ComplexMatrix> {
    check_square(c)?;
    if !(noise_var >= 0.0) {
        return Err(Error::InvalidConfig(format!("noise variance {noise_var} must be >= 0")));
    }
    let n = c.nrows();
    let mut gram = c * c.adjoint();
    for i in 0..n {
        gram[(i, i)] += noise_var;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::IllConditioned(format!("C C^H + {noise_var} I is not positive definite")))?;
    let d = chol.solve(c);
    if !crate::transforms::is_finite(&d) {
        return Err(Error::IllConditioned("non-finite MMSE filter".into()));
    }
    Ok(d)
}

/// `x_hat = C^H (C C^H + sigma^2 I)^-1 y`.
pub fn mmse_detect(c: &ComplexMatrix, y: &DVector<Complex64>, noise_var: f64) -> Result<DVector<Complex64>> {
    check_square(c)?;
    if y.len() != c.nrows() {
        return Err(mismatch(format!("{} observations", c.nrows()), format!("{}", y.len())));
    }
    let n = c.nrows();
    let mut gram = c * c.adjoint();
    for i in 0..n {
        gram[(i, i)] += noise_var;
    }
    let chol = gram
        .cholesky()
        .ok_or_else(|| Error::IllConditioned(format!("C C^H + {noise_var} I is not positive definite")))?;
    Ok(c.adjoint() * chol.solve(y))
}

/// Per-bin MMSE SINR
/// `|d_j^H C_j|^2 / (sum_{i != j} |d_j^H C_i|^2 + sigma^2 ||d_j||^2)`.
///
/// `C` is `KN x KN`; bins are grouped by the caller's `K` via [`SinrMap`].
pub fn sinr_map(c: &ComplexMatrix, noise_var: f64) -> Result<SinrMap> {
    sinr_values(c, noise_var).and_then(|v| SinrMap::new(v, c.nrows(), 1))
}

pub fn sinr_values(c: &ComplexMatrix, noise_var: f64) -> Result<Vec<f64>> {
    let d = mmse_filters(c, noise_var)?;
    // g[(j, i)] = d_j^H C_i
    let g = d.adjoint() * c;
    Ok((0..c.ncols())
        .map(|j| {
            let row = g.row(j);
            let signal = row[j].norm_sqr();
            let interference: f64 = row
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != j)
                .map(|(_, z)| z.norm_sqr())
                .sum();
            let noise = noise_var * d.column(j).norm_squared();
            let den = interference + noise;
            if den == 0.0 {
                f64::INFINITY
            } else {
                signal / den
            }
        })
        .collect())
}

/// MMSE detection and SINR for one channel across many noise levels.
///
/// Uses `x_hat = (C^H C + sigma^2 I)^-1 C^H y` and the per-bin identity
/// `SINR_j = 1 / (sigma^2 [(C^H C + sigma^2 I)^-1]_jj) - 1`, so the Gram
/// matrix is formed once and each noise level costs one Cholesky factorization.
#[derive(Debug, Clone)]
pub struct MmseEngine {
    gram: ComplexMatrix,
}

impl MmseEngine {
    pub fn new(c: &ComplexMatrix) -> Result<Self> {
        check_square(c)?;
        Ok(MmseEngine { gram: c.adjoint() * c })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    /// Factorizes `C^H C + sigma^2 I`; `sigma^2` must be positive.
    pub fn at(&self, noise_var: f64) -> Result<MmseAtNoise> {
        if !(noise_var > 0.0 && noise_var.is_finite()) {
            return Err(Error::InvalidConfig(format!("noise variance {noise_var} must be positive")));
        }
        let mut a = self.gram.clone();
        for i in 0..a.nrows() {
            a[(i, i)] += noise_var;
        }
        let chol = a
            .cholesky()
            .ok_or_else(|| Error::IllConditioned(format!("C^H C + {noise_var} I is not positive definite")))?;
        Ok(MmseAtNoise { chol, noise_var })
    }
}

/// [`MmseEngine`] factorized at one noise level.
#[derive(Debug, Clone)]
pub struct MmseAtNoise {
    chol: nalgebra::Cholesky<Complex64, nalgebra::Dyn>,
    noise_var: f64,
}

impl MmseAtNoise {
    pub fn detect(&self, c: &ComplexMatrix, y: &DVector<Complex64>) -> Result<DVector<Complex64>> {
        if y.len() != c.nrows() || c.ncols() != self.chol.l_dirty().nrows() {
            return Err(mismatch(format!("{} observations", c.nrows()), format!("{}", y.len())));
        }
        Ok(self.chol.solve(&(c.adjoint() * y)))
    }

    /// Per-bin SINR for every column of `C`.
    pub fn sinr_values(&self) -> Result<Vec<f64>> {
        let l = self.chol.l();
        let n = l.nrows();
        let mut inv = ComplexMatrix::identity(n, n);
        if !l.solve_lower_triangular_mut(&mut inv) {
            return Err(Error::IllConditioned("singular Cholesky factor".into()));
        }
        // [A^-1]_jj = ||column j of L^-1||^2
        Ok(inv
            .column_iter()
            .map(|col| {
                let diag = col.norm_squared();
                (1.0 / (self.noise_var * diag) - 1.0).max(0.0)
            })
            .collect())
    }

    pub fn sinr_grid(&self, subcarriers: usize) -> Result<SinrMap> {
        let values = self.sinr_values()?;
        let dim = values.len();
        if subcarriers == 0 || dim % subcarriers != 0 {
            return Err(mismatch(format!("multiple of {subcarriers}"), format!("{dim}")));
        }
        SinrMap::new(values, subcarriers, dim / subcarriers)
    }
}

/// SINR map of an effective channel arranged on a `K x N` grid.
pub fn sinr_grid(c: &ComplexMatrix, noise_var: f64, subcarriers: usize) -> Result<SinrMap> {
    let dim = c.nrows();
    if subcarriers == 0 || dim % subcarriers != 0 {
        return Err(mismatch(format!("multiple of {subcarriers}"), format!("{dim}")));
    }
    SinrMap::new(sinr_values(c, noise_var)?, subcarriers, dim / subcarriers)
}

pub fn to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Linear-domain mean SINR over the non-guard bins `N_G .. K - N_G`, in dB.
pub fn net_sinr(map: &SinrMap, guard: usize) -> Result<f64> {
    check_guard(guard, map.subcarriers)?;
    let active = (map.subcarriers - 2 * guard) * map.symbols;
    let sum: f64 = map.active(guard).sum();
    Ok(to_db(sum / active as f64))
}

/// `xi / (K N) * sum_{non-guard} log2(1 + SINR)`; guard bins contribute zero.
pub fn avg_spectral_efficiency(map: &SinrMap, efficiency: f64, guard: usize) -> Result<f64> {
    check_guard(guard, map.subcarriers)?;
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::InvalidConfig(format!("efficiency factor {efficiency} outside (0, 1]")));
    }
    let total = (map.subcarriers * map.symbols) as f64;
    Ok(efficiency / total * map.active(guard).map(|s| (1.0 + s).log2()).sum::<f64>())
}

/// `||x_hat - x||^2 / ||x||^2`.
pub fn normalized_mse(estimate: &[Complex64], reference: &[Complex64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(mismatch(format!("{} samples", reference.len()), format!("{}", estimate.len())));
    }
    let energy: f64 = reference.iter().map(|z| z.norm_sqr()).sum();
    if energy == 0.0 {
        return Err(Error::ZeroReference);
    }
    let err: f64 = estimate.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / energy)
}

/// Unit-energy QPSK grid.
pub fn qpsk_grid<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> ComplexMatrix {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        let bits: u8 = rng.random_range(0..4);
        Complex64::new(if bits & 1 == 0 { a } else { -a }, if bits & 2 == 0 { a } else { -a })
    })
}

/// Power spectral density samples on an ascending frequency axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub freqs_hz: Vec<f64>,
    /// Linear power per Hz.
    pub density: Vec<f64>,
    pub bin_hz: f64,
    /// Mean `|x|^2` over the samples that entered the estimate.
    pub mean_power: f64,
}

impl Psd {
    /// `sum density * bin_hz`.
    pub fn total_power(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_hz
    }

    /// Power in dB relative to the peak.
    pub fn normalized_db(&self) -> Vec<f64> {
        let peak = self.density.iter().cloned().fold(0.0, f64::max);
        self.density.iter().map(|p| to_db(p / peak)).collect()
    }
}

/// Welch parameters: segment length, 50% overlap, periodic Hann window.
#[derive(Debug, Clone, Copy)]
pub struct WelchSpec {
    pub segment: usize,
    pub sample_rate: f64,
}

/// Welch-averaged periodogram of `trials` frames produced by `generator`,
/// each frame segmented independently.
pub fn psd_estimate<F>(mut generator: F, spec: WelchSpec, trials: usize, seed: u64) -> Result<Psd>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<Vec<Complex64>>,
{
    if trials == 0 || spec.segment < 2 || !(spec.sample_rate > 0.0) {
        return Err(Error::InvalidConfig("PSD needs trials >= 1, segment >= 2, positive sample rate".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut planner = FftPlanner::<f64>::new();
    let mut acc: Vec<f64> = Vec::new();
    let mut seg_len = 0usize;
    let mut segments = 0usize;
    let mut window: Vec<f64> = Vec::new();
    let mut fft = None;
    let mut power_sum = 0.0;
    let mut power_count = 0usize;
    let mut buf = Vec::new();
    for _ in 0..trials {
        let frame = generator(&mut rng)?;
        if frame.is_empty() {
            return Err(Error::InvalidSize("empty frame".into()));
        }
        let len = spec.segment.min(frame.len());
        if seg_len == 0 {
            seg_len = len;
            window = (0..len).map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos()).collect();
            acc = vec![0.0; len];
            fft = Some(planner.plan_fft_forward(len));
        } else if len != seg_len {
            return Err(mismatch(format!("frames of >= {seg_len} samples"), format!("{}", frame.len())));
        }
        let hop = (seg_len / 2).max(1);
        let fft = fft.as_ref().expect("planned above");
        let mut start = 0;
        while start + seg_len <= frame.len() {
            let seg = &frame[start..start + seg_len];
            buf.clear();
            buf.extend(seg.iter().zip(&window).map(|(x, w)| x * *w));
            fft.process(&mut buf);
            for (a, z) in acc.iter_mut().zip(&buf) {
                *a += z.norm_sqr();
            }
            power_sum += seg.iter().map(|z| z.norm_sqr()).sum::<f64>();
            power_count += seg_len;
            segments += 1;
            start += hop;
        }
    }
    let win_energy: f64 = window.iter().map(|w| w * w).sum();
    let scale = 1.0 / (segments as f64 * spec.sample_rate * win_energy);
    let bin = spec.sample_rate / seg_len as f64;
    // fftshift to an ascending axis
    let half = seg_len.div_ceil(2);
    let order: Vec<usize> = (half..seg_len).chain(0..half).collect();
    let freqs_hz = order
        .iter()
        .map(|&k| if k >= half { (k as f64 - seg_len as f64) * bin } else { k as f64 * bin })
        .collect();
    let density = order.iter().map(|&k| acc[k] * scale).collect();
    Ok(Psd {
        freqs_hz,
        density,
        bin_hz: bin,
        mean_power: power_sum / power_count as f64,
    })
}

/// Peak PSD outside `[-band_edge, band_edge]` relative to the in-band peak, in dB.
pub fn oob_level_db(psd: &Psd, band_edge: f64) -> f64 {
    let tol = 1e-9 * band_edge.abs().max(1.0);
    let (mut inside, mut outside) = (0.0f64, 0.0f64);
    for (f, p) in psd.freqs_hz.iter().zip(&psd.density) {
        if f.abs() <= band_edge + tol {
            inside = inside.max(*p);
        } else {
            outside = outside.max(*p);
        }
    }
    if outside == 0.0 {
        f64::NEG_INFINITY
    } else {
        to_db(outside / inside)
    }
}

/// Smallest per-edge guard count whose OOB level is at or below `threshold_db`.
///
/// `measure(n_g)` returns the PSD with `n_g` subcarriers nulled at each edge.
/// Bisects over `0..=max_guard`, relying on the OOB level being non-increasing
/// in the guard count.
pub fn guard_count_for_threshold<F>(mut measure: F, threshold_db: f64, band_edge: f64, max_guard: usize) -> Result<usize>
where
    F: FnMut(usize) -> Result<Psd>,
{
    let mut level = |g: usize| -> Result<f64> { Ok(oob_level_db(&measure(g)?, band_edge)) };
    if level(0)? <= threshold_db {
        return Ok(0);
    }
    let best = level(max_guard)?;
    if best > threshold_db {
        return Err(Error::NotAchievable {
            threshold_db,
            best_db: best,
            max_guard,
        });
    }
    // level(lo) > threshold >= level(hi)
    let (mut lo, mut hi) = (0usize, max_guard);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if level(mid)? <= threshold_db {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_matrix(n: usize, seed: u64) -> ComplexMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ComplexMatrix::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn identity_channel_detection() {
        let c = ComplexMatrix::identity(4, 4);
        let y = DVector::from_fn(4, |i, _| Complex64::new(i as f64, -1.0));
        let x = mmse_detect(&c, &y, 1.0).unwrap();
        assert!((x - &y / Complex64::new(2.0, 0.0)).norm() < 1e-14);
        let x0 = mmse_detect(&c, &y, 1e-12).unwrap();
        assert!((x0 - &y).norm() < 1e-10);
    }

    #[test]
    fn detector_matches_dense_inverse() {
        let c = random_matrix(4, 3);
        let sigma2 = 0.3;
        let a = &c * c.adjoint() + ComplexMatrix::identity(4, 4) * Complex64::new(sigma2, 0.0);
        let inv = a.try_inverse().unwrap();
        let d = mmse_filters(&c, sigma2).unwrap();
        for j in 0..4 {
            // d_j^H = C_j^H (CC^H + s I)^-1
            let row = c.column(j).adjoint() * &inv;
            for i in 0..4 {
                assert!((row[i] - d[(i, j)].conj()).norm() < 1e-10);
            }
        }
        let y = DVector::from_fn(4, |i, _| Complex64::new(1.0, i as f64));
        let x = mmse_detect(&c, &y, sigma2).unwrap();
        let want = c.adjoint() * &inv * &y;
        assert!((x - want).norm() < 1e-10);
    }

    #[test]
    fn scaled_identity_sinr() {
        let p: f64 = 3.0;
        let c = ComplexMatrix::identity(6, 6) * Complex64::new(p.sqrt(), 0.0);
        let map = sinr_map(&c, 0.5).unwrap();
        assert!(map.values.iter().all(|s| (s - p / 0.5).abs() < 1e-10));
    }

    #[test]
    fn toy_channel_sinr_by_hand() {
        let c = ComplexMatrix::from_row_slice(
            2,
            2,
            &[Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)],
        );
        let s2 = 0.1;
        let a = &c * c.adjoint() + ComplexMatrix::identity(2, 2) * Complex64::new(s2, 0.0);
        let inv = a.try_inverse().unwrap();
        let map = sinr_map(&c, s2).unwrap();
        for j in 0..2 {
            let d = &inv * c.column(j);
            let sig = (d.adjoint() * c.column(j))[0].norm_sqr();
            let other = (d.adjoint() * c.column(1 - j))[0].norm_sqr();
            let want = sig / (other + s2 * d.norm_squared());
            // closed form: c_j^H (C_-j C_-j^H + s I)^-1 c_j
            let cm = c.column(1 - j);
            let b = &cm * cm.adjoint() + ComplexMatrix::identity(2, 2) * Complex64::new(s2, 0.0);
            let closed = (c.column(j).adjoint() * b.try_inverse().unwrap() * c.column(j))[0].re;
            assert!((map.values[j] - want).abs() < 1e-10);
            assert!((map.values[j] - closed).abs() < 1e-9);
        }
    }

    #[test]
    fn sinr_invariant_under_unitary_rotation() {
        let c = random_matrix(5, 8);
        let q = crate::transforms::dft_matrix(5).unwrap();
        let a = sinr_map(&c, 0.2).unwrap();
        let b = sinr_map(&(q * &c), 0.2).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-9 * x.max(1.0));
        }
    }

    #[test]
    fn engine_matches_literal_sinr_and_detector() {
        let c = random_matrix(12, 21);
        let engine = MmseEngine::new(&c).unwrap();
        let y = DVector::from_fn(12, |i, _| Complex64::new(0.5 * i as f64, -1.0));
        for s2 in [1e-4, 0.05, 1.0, 30.0] {
            let at = engine.at(s2).unwrap();
            let fast = at.sinr_values().unwrap();
            let literal = sinr_values(&c, s2).unwrap();
            for (a, b) in fast.iter().zip(&literal) {
                assert!((a - b).abs() <= 1e-9 * b.max(1.0), "{s2}: {a} vs {b}");
            }
            let x1 = at.detect(&c, &y).unwrap();
            let x2 = mmse_detect(&c, &y, s2).unwrap();
            assert!((x1 - &x2).norm() <= 1e-9 * x2.norm());
        }
        assert!(engine.at(0.0).is_err());
    }

    #[test]
    fn singular_noiseless_system_is_reported() {
        let c = ComplexMatrix::zeros(3, 3);
        assert!(matches!(sinr_map(&c, 0.0), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn net_sinr_cases() {
        let uniform = SinrMap::new(vec![5.0; 16], 8, 2).unwrap();
        assert!((net_sinr(&uniform, 0).unwrap() - to_db(5.0)).abs() < 1e-12);
        assert!((net_sinr(&uniform, 3).unwrap() - to_db(5.0)).abs() < 1e-12);
        let values: Vec<f64> = (0..16).map(|i| i as f64).collect();
        let map = SinrMap::new(values, 8, 2).unwrap();
        // interior k = 2..6 in both symbols: 2+3+4+5 + 10+11+12+13 = 60 over 8
        assert!((net_sinr(&map, 2).unwrap() - to_db(7.5)).abs() < 1e-12);
        assert!((net_sinr(&map, 0).unwrap() - to_db(7.5)).abs() < 1e-12);
        assert!(matches!(net_sinr(&map, 4), Err(Error::InvalidGuard { .. })));
    }

    #[test]
    fn spectral_efficiency_cases() {
        let zero = SinrMap::new(vec![0.0; 16], 8, 2).unwrap();
        assert_eq!(avg_spectral_efficiency(&zero, 1.0, 0).unwrap(), 0.0);
        let three = SinrMap::new(vec![3.0; 16], 8, 2).unwrap();
        // 12 of 16 bins active, log2(4) = 2 each
        let se = avg_spectral_efficiency(&three, 0.5, 1).unwrap();
        assert!((se - 0.5 * 2.0 * 12.0 / 16.0).abs() < 1e-12);
        assert!(avg_spectral_efficiency(&three, 1.5, 1).is_err());
    }

    #[test]
    fn nmse_cases() {
        let x: Vec<Complex64> = (0..8).map(|i| Complex64::new(i as f64 + 1.0, 1.0)).collect();
        assert_eq!(normalized_mse(&x, &x).unwrap(), 0.0);
        let zero = vec![Complex64::new(0.0, 0.0); 8];
        assert!((normalized_mse(&zero, &x).unwrap() - 1.0).abs() < 1e-15);
        let noisy: Vec<Complex64> = x.iter().map(|z| z * 1.5).collect();
        assert!((normalized_mse(&noisy, &x).unwrap() - 0.25).abs() < 1e-12);
        assert!(matches!(normalized_mse(&x, &zero), Err(Error::ZeroReference)));
    }

    #[test]
    fn constant_signal_is_dc() {
        let spec = WelchSpec {
            segment: 64,
            sample_rate: 1e3,
        };
        let psd = psd_estimate(|_| Ok(vec![Complex64::new(1.0, 0.0); 256]), spec, 2, 0).unwrap();
        let peak = psd.density.iter().cloned().fold(0.0, f64::max);
        for (f, p) in psd.freqs_hz.iter().zip(&psd.density) {
            if f.abs() < 1e-9 {
                assert_eq!(*p, peak);
            } else if f.abs() > 1.5 * psd.bin_hz {
                assert!(p / peak < 1e-20);
            }
        }
    }

    #[test]
    fn parseval_holds() {
        let spec = WelchSpec {
            segment: 128,
            sample_rate: 2e6,
        };
        let psd = psd_estimate(
            |rng| {
                let g = qpsk_grid(rng, 1024, 1);
                Ok(g.iter().map(|z| z * 1.7).collect())
            },
            spec,
            50,
            1,
        )
        .unwrap();
        let ratio = psd.total_power() / psd.mean_power;
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn guard_search_on_synthetic_levels() {
        // level drops 3 dB per guard carrier from +0 dB
        let make = |g: usize| -> Result<Psd> {
            let out = 10f64.powf(-3.0 * g as f64 / 10.0);
            Ok(Psd {
                freqs_hz: vec![-2.0, 0.0, 2.0],
                density: vec![out, 1.0, out],
                bin_hz: 1.0,
                mean_power: 1.0,
            })
        };
        assert_eq!(guard_count_for_threshold(make, -30.0, 1.0, 20).unwrap(), 10);
        assert_eq!(guard_count_for_threshold(make, 0.0, 1.0, 20).unwrap(), 0);
        assert!(matches!(
            guard_count_for_threshold(make, -100.0, 1.0, 20),
            Err(Error::NotAchievable { .. })
        ));
    }
}
