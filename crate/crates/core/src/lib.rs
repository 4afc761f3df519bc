//! Delay-Doppler multicarrier modulation over linear time-varying channels.
//!
//! Provides OTFS, delay-Doppler UFMC and OFDM baselines with their effective
//! channel matrices, MMSE-based SINR and spectral-efficiency metrics, and a
//! reproducible Monte-Carlo sweep harness.

pub mod channel;
pub mod config;
pub mod drufmc;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod ofdm;
pub mod otfs;
pub mod transforms;

pub use config::ModemConfig;
pub use error::{Error, Result};
pub use transforms::{ComplexMatrix, ComplexVector};
