//! Relay configuration matrices for passive reflecting surfaces and
//! amplify-and-forward relays, relay codebooks, and the relayed noise term.
//!
//! Both relay kinds use a diagonal configuration `Phi = g diag(e^{j theta_n})`
//! with `g = 1` for a reflecting surface, so every link-engine code path is
//! shared between the two.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::antenna::{ArrayGeometry, Codeword};
use crate::channel::ChannelRealization;
use crate::math::{cis, CMatrix, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelayKind {
    Irs,
    Af,
}

impl RelayKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RelayKind::Irs => "irs",
            RelayKind::Af => "af",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelayConfigMatrix {
    pub kind: RelayKind,
    /// Per-element phase shifts, radians.
    pub phases: Vec<f64>,
    /// Amplification gain; always 0 for a reflecting surface.
    pub amp_gain_db: f64,
}

impl RelayConfigMatrix {
    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Amplitude gain `g = 10^(dB/20)`.
    pub fn amplitude(&self) -> f64 {
        10f64.powf(self.amp_gain_db / 20.0)
    }

    /// Diagonal entries `g e^{j theta_n}`.
    pub fn diag(&self) -> Vec<Complex64> {
        let g = self.amplitude();
        self.phases.iter().map(|&t| cis(t) * g).collect()
    }

    /// Dense `N x N` form, mostly for tests.
    pub fn to_matrix(&self) -> CMatrix {
        let d = self.diag();
        CMatrix::from_fn(d.len(), d.len(), |r, c| {
            if r == c {
                d[r]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// `Phi x`.
    pub fn apply(&self, x: &[Complex64]) -> Result<Vec<Complex64>> {
        if x.len() != self.len() {
            return Err(Error::Dimension(format!(
                "relay has {} elements, vector has {}",
                self.len(),
                x.len()
            )));
        }
        Ok(self.diag().iter().zip(x).map(|(d, v)| d * v).collect())
    }

    /// Same configuration with a global phase rotation.
    pub fn rotated(&self, alpha: f64) -> Self {
        Self {
            phases: self.phases.iter().map(|p| p + alpha).collect(),
            ..self.clone()
        }
    }
}

/// Passive surface: unit-modulus diagonal.
pub fn irs_matrix(phases: Vec<f64>) -> RelayConfigMatrix {
    RelayConfigMatrix {
        kind: RelayKind::Irs,
        phases,
        amp_gain_db: 0.0,
    }
}

/// Amplify-and-forward relay with uniform amplification.
pub fn af_matrix(phases: Vec<f64>, amp_gain_db: f64) -> Result<RelayConfigMatrix> {
    if !(amp_gain_db >= 0.0 && amp_gain_db.is_finite()) {
        return Err(Error::Domain(format!(
            "amplification gain must be >= 0 dB, got {amp_gain_db}"
        )));
    }
    Ok(RelayConfigMatrix {
        kind: RelayKind::Af,
        phases,
        amp_gain_db,
    })
}

/// Offsets `(i, j)` of a square lattice ordered by ring (Chebyshev distance
/// from the centre), then by Manhattan distance, then row, then column.
fn ring_offsets(n: usize) -> Vec<(i64, i64)> {
    let mut r = 0i64;
    while ((2 * r + 1) * (2 * r + 1)) < n as i64 {
        r += 1;
    }
    let mut offs: Vec<(i64, i64)> = (-r..=r)
        .flat_map(|j| (-r..=r).map(move |i| (i, j)))
        .collect();
    offs.sort_by_key(|&(i, j)| (i.abs().max(j.abs()), i.abs() + j.abs(), j, i));
    offs.truncate(n);
    offs
}

/// Sine-space beam lattice with half-beamwidth spacing around `center`.
fn lattice(geom: &ArrayGeometry, center: Option<Vec3>, n: usize) -> Vec<(f64, f64)> {
    let (u0, v0) = center.map(|d| geom.sine_coords(d)).unwrap_or((0.0, 0.0));
    let du = 1.0 / (2.0 * geom.spacing * geom.cols_h as f64);
    let dv = 1.0 / (2.0 * geom.spacing * geom.rows_v as f64);
    ring_offsets(n)
        .into_iter()
        .map(|(i, j)| (u0 + i as f64 * du, v0 + j as f64 * dv))
        .collect()
}

/// Reflect-and-steer codebook around the panel broadside.
///
/// Entry `i * n_out + o` couples incidence lattice point `i` with departure
/// lattice point `o`.
pub fn relay_codebook(
    kind: RelayKind,
    amp_gain_db: f64,
    geom: &ArrayGeometry,
    n_in: usize,
    n_out: usize,
) -> Result<Vec<RelayConfigMatrix>> {
    relay_codebook_toward(kind, amp_gain_db, geom, None, None, n_in, n_out)
}

/// Reflect-and-steer codebook whose incidence and departure lattices are
/// centred on the given directions (relay toward source, relay toward
/// destination). `None` centres a lattice on broadside.
pub fn relay_codebook_toward(
    kind: RelayKind,
    amp_gain_db: f64,
    geom: &ArrayGeometry,
    toward_in: Option<Vec3>,
    toward_out: Option<Vec3>,
    n_in: usize,
    n_out: usize,
) -> Result<Vec<RelayConfigMatrix>> {
    geom.validate()?;
    if n_in == 0 || n_out == 0 {
        return Err(Error::config("relay.codebook", "n_in and n_out must be >= 1"));
    }
    let ins: Vec<Vec<Complex64>> = lattice(geom, toward_in, n_in)
        .into_iter()
        .map(|(u, v)| geom.manifold_sine(u, v))
        .collect();
    let outs: Vec<Vec<Complex64>> = lattice(geom, toward_out, n_out)
        .into_iter()
        .map(|(u, v)| geom.manifold_sine(u, v))
        .collect();
    let mut book = Vec::with_capacity(n_in * n_out);
    for a_in in &ins {
        for a_out in &outs {
            let phases = a_in
                .iter()
                .zip(a_out)
                .map(|(a, b)| -(a.arg() + b.arg()))
                .collect();
            book.push(match kind {
                RelayKind::Irs => irs_matrix(phases),
                RelayKind::Af => af_matrix(phases, amp_gain_db)?,
            });
        }
    }
    Ok(book)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelayNoise {
    /// Noise power per receive chain, W.
    pub sigma2: f64,
    pub noise_figure_db: f64,
}

impl RelayNoise {
    /// Thermal noise over `bandwidth_hz` plus the noise figure.
    pub fn thermal(bandwidth_hz: f64, noise_figure_db: f64) -> Self {
        let dbm = crate::THERMAL_NOISE_DBM_HZ + crate::lin_to_db(bandwidth_hz) + noise_figure_db;
        Self {
            sigma2: crate::dbm_to_w(dbm),
            noise_figure_db,
        }
    }

    pub fn zero() -> Self {
        Self {
            sigma2: 0.0,
            noise_figure_db: 0.0,
        }
    }
}

/// `sum_k |b_k|^2 |phi_k|^2 sigma2` for a precomputed row `b = w_D^T H_RD`.
pub fn relayed_noise_from_row(b: &[Complex64], phi: &RelayConfigMatrix, noise: &RelayNoise) -> f64 {
    if phi.kind == RelayKind::Irs {
        return 0.0;
    }
    let g2 = phi.amplitude().powi(2);
    b.iter().map(|x| x.norm_sqr()).sum::<f64>() * g2 * noise.sigma2
}

/// Power of the relay noise reaching the destination after receive
/// beamforming, `w_D^T H_RD Phi Phi^H H_RD^H w_D^* sigma2`, over the
/// long-term relay-to-destination channel. A passive surface adds no noise.
pub fn af_relayed_noise_power(
    w_d: &Codeword,
    h_rd: &ChannelRealization,
    phi: &RelayConfigMatrix,
    noise: &RelayNoise,
) -> Result<f64> {
    let (n_rx, n_tx) = h_rd.shape();
    if w_d.len() != n_rx || phi.len() != n_tx {
        return Err(Error::Dimension(format!(
            "w_D has {} entries, Phi {}, H_RD is {n_rx}x{n_tx}",
            w_d.len(),
            phi.len()
        )));
    }
    let b = h_rd.long_term().vec_mul(&w_d.weights)?;
    Ok(relayed_noise_from_row(&b, phi, noise))
}
