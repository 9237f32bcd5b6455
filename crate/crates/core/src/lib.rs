//! End-to-end simulation of 5G mmWave downlinks assisted by intelligent
//! reflecting surfaces (IRS) and amplify-and-forward (AF) relays.
//!
//! The crate is organized bottom-up:
//!
//! - [`scenario`]: node geometry, obstacles and LOS/NLOS determination.
//! - [`antenna`]: planar arrays, element patterns, steering vectors, codebooks.
//! - [`channel`]: stochastic cluster draws, MIMO channel assembly, path loss.
//! - [`relay`]: relay configuration matrices, relay codebooks, AF noise.
//! - [`link_engine`]: beam sweep, long-term fading, PSDs and per-subband SINR.
//! - [`mac_phy`]: MCS selection, link-to-system mapping, TDMA and ARQ.
//! - [`traffic`]: CBR sources, queues and KPI aggregation.
//! - [`sim`]: discrete-event engine, run configuration, outputs and campaigns.

pub mod antenna;
pub mod channel;
pub mod error;
pub mod link_engine;
pub mod mac_phy;
pub mod math;
pub mod relay;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod traffic;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Thermal noise power spectral density at 290 K, dBm/Hz.
pub const THERMAL_NOISE_DBM_HZ: f64 = -174.0;

/// Converts dB to a linear power ratio.
#[inline]
pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Converts a linear power ratio to dB.
#[inline]
pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Converts dBm to watts.
#[inline]
pub fn dbm_to_w(dbm: f64) -> f64 {
    db_to_lin(dbm - 30.0)
}
