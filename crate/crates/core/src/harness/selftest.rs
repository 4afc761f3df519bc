use nalgebra::DVector;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::{channel_matrices, materialize_taps, sample_eva_paths, PathSet};
use crate::config::ModemConfig;
use crate::drufmc::{drufmc_chain, DrUfmcModem};
use crate::error::Result;
use crate::metrics::{mmse_detect, net_sinr, psd_estimate, qpsk_grid, sinr_map, SinrMap, WelchSpec};
use crate::otfs::{otfs_chain, OtfsModem};
use crate::transforms::{vec, ComplexMatrix};

#[derive(Debug, Clone)]
pub struct SelfTestResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, outcome: Result<(bool, String)>) -> SelfTestResult {
    match outcome {
        Ok((passed, detail)) => SelfTestResult { name, passed, detail },
        Err(e) => SelfTestResult {
            name,
            passed: false,
            detail: format!("error: {e}"),
        },
    }
}

fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn otfs_loopback() -> Result<(bool, String)> {
    let cfg = ModemConfig::desk();
    let modem = OtfsModem::new(&cfg)?;
    let chan = channel_matrices(&materialize_taps(&PathSet::ideal(), &cfg, cfg.block_len() + cfg.cp_len)?, &cfg, true)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = qpsk_grid(&mut rng, cfg.subcarriers, cfg.symbols);
    let y = otfs_chain(&modem, &chan, &x)?;
    let err = max_abs_diff(y.as_slice(), x.as_slice());
    Ok((err < 1e-10, format!("max error {err:.2e}")))
}

fn probing(drufmc: bool) -> Result<(bool, String)> {
    let cfg = ModemConfig::desk();
    let paths = sample_eva_paths(5, 500.0 / 3.6, cfg.carrier_freq)?;
    let with_cp = !drufmc;
    let block = cfg.block_len() + if with_cp { cfg.cp_len } else { 0 };
    let chan = channel_matrices(&materialize_taps(&paths, &cfg, block)?, &cfg, with_cp)?;
    let (k, n) = (cfg.subcarriers, cfg.symbols);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let otfs = OtfsModem::new(&cfg)?;
    let ufmc = DrUfmcModem::new(&cfg)?;
    let c = if drufmc { ufmc.effective_channel(&chan)? } else { otfs.effective_channel(&chan)? };
    for _ in 0..8 {
        let j = rng.random_range(0..k * n);
        let mut e = ComplexMatrix::zeros(k, n);
        e[(j % k, j / k)] = Complex64::new(1.0, 0.0);
        let y = if drufmc { drufmc_chain(&ufmc, &chan, &e)? } else { otfs_chain(&otfs, &chan, &e)? };
        let col = c.matrix.column(j);
        worst = worst.max((&y - col).norm() / col.norm());
    }
    Ok((worst < 1e-9, format!("worst relative column error {worst:.2e}")))
}

fn dual_construction() -> Result<(bool, String)> {
    let cfg = ModemConfig {
        subcarriers: 16,
        symbols: 4,
        oversampling: 2,
        subband_size: 4,
        filter_len: 5,
        ..ModemConfig::desk()
    };
    let modem = DrUfmcModem::new(&cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let x = ComplexMatrix::from_fn(16, 4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let procedural = modem.modulate(&x)?;
    let matrix = modem.modulation_matrix() * vec(&x);
    let err = max_abs_diff(&procedural, matrix.as_slice());
    Ok((err < 1e-12, format!("max difference {err:.2e}")))
}

fn mmse_oracle() -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let c = ComplexMatrix::from_fn(4, 4, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let y = DVector::from_fn(4, |i, _| Complex64::new(i as f64, 1.0));
    let sigma2 = 0.25;
    let a = &c * c.adjoint() + ComplexMatrix::identity(4, 4) * Complex64::new(sigma2, 0.0);
    let inv = a.clone().try_inverse().expect("regularized Gram matrix is invertible");
    let want = c.adjoint() * &inv * &y;
    let got = mmse_detect(&c, &y, sigma2)?;
    let err = (got - want).norm();
    let mut monotone = true;
    let mut prev = sinr_map(&c, 1e-3)?;
    for s in [1e-2, 1e-1, 1.0, 10.0] {
        let next = sinr_map(&c, s)?;
        monotone &= next.values.iter().zip(&prev.values).all(|(a, b)| *a <= b * (1.0 + 1e-12));
        prev = next;
    }
    Ok((err < 1e-10 && monotone, format!("detector error {err:.2e}, SINR monotone in noise: {monotone}")))
}

fn net_sinr_average() -> Result<(bool, String)> {
    let map = SinrMap::new((0..16).map(|v| v as f64).collect(), 8, 2)?;
    let got = net_sinr(&map, 2)?;
    let want = 10.0 * 7.5f64.log10();
    Ok(((got - want).abs() < 1e-12, format!("{got:.6} dB vs {want:.6} dB")))
}

fn parseval() -> Result<(bool, String)> {
    let spec = WelchSpec {
        segment: 128,
        sample_rate: 1e6,
    };
    let psd = psd_estimate(|rng| Ok(qpsk_grid(rng, 2048, 1).as_slice().to_vec()), spec, 20, 2)?;
    let ratio = psd.total_power() / psd.mean_power;
    Ok(((ratio - 1.0).abs() < 0.01, format!("PSD power / time power = {ratio:.4}")))
}

/// Runs the built-in oracle checks on small configurations.
pub fn selftest() -> Vec<SelfTestResult> {
    vec![
        check("otfs-loopback", otfs_loopback()),
        check("otfs-effective-channel-probing", probing(false)),
        check("drufmc-effective-channel-probing", probing(true)),
        check("drufmc-dual-construction", dual_construction()),
        check("mmse-dense-inverse", mmse_oracle()),
        check("net-sinr-average", net_sinr_average()),
        check("psd-parseval", parseval()),
    ]
}
