//! Per-link SINR pipeline: exhaustive configuration sweep over long-term
//! channels, long-term fading terms, frequency-selective PSDs, cascaded path
//! loss, interference and the effective-SINR reduction.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::antenna::{Codebook, Codeword};
use crate::channel::{path_loss_db, ChannelRealization, PathLossParams};
use crate::math::{cis, dotu, CMatrix};
use crate::relay::{relayed_noise_from_row, RelayConfigMatrix, RelayNoise};
use crate::{db_to_lin, lin_to_db, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandGrid {
    pub n_subbands: usize,
    pub subband_hz: f64,
    /// Baseband offsets of the subband centres, Hz.
    pub center_freqs: Vec<f64>,
}

impl SubbandGrid {
    pub fn new(n_subbands: usize, bandwidth_hz: f64) -> Result<Self> {
        if n_subbands == 0 || !(bandwidth_hz > 0.0) {
            return Err(Error::config("subbands", "need >= 1 subband and bandwidth > 0"));
        }
        let subband_hz = bandwidth_hz / n_subbands as f64;
        let center_freqs = (0..n_subbands)
            .map(|i| (i as f64 + 0.5) * subband_hz - bandwidth_hz / 2.0)
            .collect();
        Ok(Self {
            n_subbands,
            subband_hz,
            center_freqs,
        })
    }

    /// 50 subbands of 2 MHz.
    pub fn default_100mhz() -> Self {
        Self::new(50, 100e6).expect("valid grid")
    }

    pub fn bandwidth(&self) -> f64 {
        self.subband_hz * self.n_subbands as f64
    }
}

/// Power spectral density sampled per subband, W/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct Psd {
    pub values: Vec<f64>,
    pub grid: SubbandGrid,
}

impl Psd {
    pub fn flat(grid: &SubbandGrid, total_power_w: f64) -> Self {
        Self {
            values: vec![total_power_w / grid.bandwidth(); grid.n_subbands],
            grid: grid.clone(),
        }
    }

    pub fn zeros(grid: &SubbandGrid) -> Self {
        Self::flat(grid, 0.0)
    }

    /// Thermal noise PSD with a receiver noise figure.
    pub fn thermal(grid: &SubbandGrid, noise_figure_db: f64) -> Self {
        let w_hz = crate::dbm_to_w(crate::THERMAL_NOISE_DBM_HZ + noise_figure_db);
        Self {
            values: vec![w_hz; grid.n_subbands],
            grid: grid.clone(),
        }
    }

    pub fn total_power(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.subband_hz
    }

    /// Same PSD attenuated by `loss_db`.
    pub fn attenuated(&self, loss_db: f64) -> Self {
        let f = db_to_lin(-loss_db);
        Self {
            values: self.values.iter().map(|v| v * f).collect(),
            grid: self.grid.clone(),
        }
    }

    fn check_grid(&self, other: &Psd) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Dimension("PSDs live on different subband grids".into()));
        }
        Ok(())
    }
}

/// Long-term fading terms for one beam/relay configuration.
#[derive(Debug, Clone, PartialEq)]
pub enum LongTermMatrix {
    /// `L[n, m]`, `n` indexing relay-destination clusters and `m`
    /// source-relay clusters.
    Relayed(CMatrix),
    /// One term per source-destination cluster.
    Direct(Vec<Complex64>),
}

impl LongTermMatrix {
    pub fn is_finite(&self) -> bool {
        match self {
            LongTermMatrix::Relayed(m) => m.is_finite(),
            LongTermMatrix::Direct(v) => v.iter().all(|c| c.is_finite()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub w_s_idx: usize,
    pub w_d_idx: usize,
    pub phi_idx: usize,
    pub predicted_snr_db: f64,
}

/// Power budget around a relayed link: the channel matrices carry no path
/// loss, so the sweep applies the per-hop linear gains here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CascadeBudget {
    pub tx_power_w: f64,
    /// Linear power gain of the source-relay hop (`10^(-PL/10)`).
    pub gain_sr: f64,
    /// Linear power gain of the relay-destination hop.
    pub gain_rd: f64,
    /// Receiver noise power over the full band, W.
    pub noise_w: f64,
}

/// Relative margin under which two candidate SNRs count as tied. Exact
/// ties are common (a one-element relay makes every phase equivalent) and
/// must not be resolved by rounding noise.
pub const SWEEP_TIE_REL: f64 = 1e-9;

type Key = (usize, usize, usize);

/// Lexicographically smallest key among the candidates within
/// [`SWEEP_TIE_REL`] of the maximum.
fn argmax_lex(cands: &[(Key, f64)]) -> Option<(Key, f64)> {
    let max = cands
        .iter()
        .map(|c| c.1)
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let floor = max - SWEEP_TIE_REL * max.abs();
    cands
        .iter()
        .filter(|c| c.1 >= floor)
        .min_by_key(|c| c.0)
        .copied()
}

/// Exhaustive search over (source codeword, destination codeword, relay
/// configuration) maximizing the long-term SNR
/// `P |w_D^T H_RD Phi H_SR w_S|^2 g_SR g_RD / (N + g_RD sigma_hat^2)`.
///
/// Candidates within [`SWEEP_TIE_REL`] of the best count as tied; ties go to
/// the lexicographically smallest `(s, d, phi)` triple, independent of the
/// number of worker threads.
pub fn sweep(
    cb_s: &Codebook,
    cb_d: &Codebook,
    cb_phi: &[RelayConfigMatrix],
    h_sr: &ChannelRealization,
    h_rd: &ChannelRealization,
    budget: &CascadeBudget,
    relay_noise: &RelayNoise,
) -> Result<SweepResult> {
    if cb_s.is_empty() || cb_d.is_empty() || cb_phi.is_empty() {
        return Err(Error::Invariant("sweep over an empty codebook".into()));
    }
    let sr = h_sr.long_term();
    let rd = h_rd.long_term();
    sweep_long_term(cb_s, cb_d, cb_phi, &sr, &rd, budget, relay_noise)
}

/// [`sweep`] over precomputed long-term matrices.
pub fn sweep_long_term(
    cb_s: &Codebook,
    cb_d: &Codebook,
    cb_phi: &[RelayConfigMatrix],
    sr: &CMatrix,
    rd: &CMatrix,
    budget: &CascadeBudget,
    relay_noise: &RelayNoise,
) -> Result<SweepResult> {
    let (n_r, n_s) = sr.shape();
    let (n_d, n_r2) = rd.shape();
    if n_r != n_r2
        || cb_s.codewords.iter().any(|w| w.len() != n_s)
        || cb_d.codewords.iter().any(|w| w.len() != n_d)
        || cb_phi.iter().any(|p| p.len() != n_r)
    {
        return Err(Error::Dimension(format!(
            "sweep: H_SR {n_r}x{n_s}, H_RD {n_d}x{n_r2} do not match the codebooks"
        )));
    }
    if cb_s.is_empty() || cb_d.is_empty() || cb_phi.is_empty() {
        return Err(Error::Invariant("sweep over an empty codebook".into()));
    }
    // b_d = w_d^T H_RD, used for the relayed noise of every (d, Phi)
    let rows_d: Vec<Vec<Complex64>> = cb_d
        .codewords
        .iter()
        .map(|w| rd.vec_mul(&w.weights))
        .collect::<Result<_>>()?;
    let sig_scale = budget.tx_power_w * budget.gain_sr * budget.gain_rd;

    let cands: Vec<(Key, f64)> = cb_phi
        .par_iter()
        .enumerate()
        .flat_map_iter(|(p, phi)| {
            let diag = phi.diag();
            // M = H_RD diag(phi) H_SR, accumulated row by row of H_SR
            let mut m = CMatrix::zeros(n_d, n_s);
            for k in 0..n_r {
                let src = sr.row(k);
                for q in 0..n_d {
                    let coef = rd[(q, k)] * diag[k];
                    for (acc, s) in m.row_mut(q).iter_mut().zip(src) {
                        *acc += coef * s;
                    }
                }
            }
            // G[:, s] = M w_s
            let g: Vec<Vec<Complex64>> = cb_s
                .codewords
                .iter()
                .map(|w| m.mul_vec(&w.weights).expect("checked dims"))
                .collect();
            let mut out = Vec::with_capacity(cb_d.len() * g.len());
            for (d, wd) in cb_d.codewords.iter().enumerate() {
                let denom = budget.noise_w + budget.gain_rd * relayed_noise_from_row(&rows_d[d], phi, relay_noise);
                for (s, gs) in g.iter().enumerate() {
                    let snr = sig_scale * dotu(&wd.weights, gs).norm_sqr() / denom;
                    out.push(((s, d, p), snr));
                }
            }
            out
        })
        .collect();
    let Some(((s, d, p), snr)) = argmax_lex(&cands) else {
        return Err(Error::Invariant("sweep produced no finite candidate".into()));
    };
    Ok(SweepResult {
        w_s_idx: s,
        w_d_idx: d,
        phi_idx: p,
        predicted_snr_db: lin_to_db(snr),
    })
}

/// Beam pair search for a relay-free link, maximizing
/// `P g |w_D^T H_SD w_S|^2 / N`.
pub fn sweep_direct(
    cb_s: &Codebook,
    cb_d: &Codebook,
    h_sd: &ChannelRealization,
    tx_power_w: f64,
    gain: f64,
    noise_w: f64,
) -> Result<SweepResult> {
    if cb_s.is_empty() || cb_d.is_empty() {
        return Err(Error::Invariant("sweep over an empty codebook".into()));
    }
    let h = h_sd.long_term();
    let g: Vec<Vec<Complex64>> = cb_s
        .codewords
        .iter()
        .map(|w| h.mul_vec(&w.weights))
        .collect::<Result<_>>()?;
    let mut cands = Vec::with_capacity(cb_d.len() * g.len());
    for (d, wd) in cb_d.codewords.iter().enumerate() {
        if wd.len() != h.rows() {
            return Err(Error::Dimension("destination codeword length".into()));
        }
        for (s, gs) in g.iter().enumerate() {
            let snr = tx_power_w * gain * dotu(&wd.weights, gs).norm_sqr() / noise_w;
            cands.push(((s, d, 0), snr));
        }
    }
    let Some(((s, d, _), snr)) = argmax_lex(&cands) else {
        return Err(Error::Invariant("sweep produced no finite candidate".into()));
    };
    Ok(SweepResult {
        w_s_idx: s,
        w_d_idx: d,
        phi_idx: 0,
        predicted_snr_db: lin_to_db(snr),
    })
}

/// `L[n, m] = w_D^T H_RD,n Phi H_SR,m w_S` for every cluster pair.
pub fn long_term(
    w_s: &Codeword,
    w_d: &Codeword,
    phi: &RelayConfigMatrix,
    h_sr: &ChannelRealization,
    h_rd: &ChannelRealization,
) -> Result<LongTermMatrix> {
    let (n_r, n_s) = h_sr.shape();
    let (n_d, n_r2) = h_rd.shape();
    if n_r != n_r2 || w_s.len() != n_s || w_d.len() != n_d || phi.len() != n_r {
        return Err(Error::Dimension(format!(
            "long_term: H_SR {n_r}x{n_s}, H_RD {n_d}x{n_r2}, w_S {}, w_D {}, Phi {}",
            w_s.len(),
            w_d.len(),
            phi.len()
        )));
    }
    let diag = phi.diag();
    let left: Vec<Vec<Complex64>> = h_rd
        .per_cluster_matrix
        .iter()
        .map(|h| {
            let row = h.vec_mul(&w_d.weights)?;
            Ok(row.iter().zip(&diag).map(|(a, d)| a * d).collect())
        })
        .collect::<Result<_>>()?;
    let right: Vec<Vec<Complex64>> = h_sr
        .per_cluster_matrix
        .iter()
        .map(|h| h.mul_vec(&w_s.weights))
        .collect::<Result<_>>()?;
    Ok(LongTermMatrix::Relayed(CMatrix::from_fn(
        left.len(),
        right.len(),
        |n, m| dotu(&left[n], &right[m]),
    )))
}

/// `L[n] = w_D^T H_SD,n w_S`.
pub fn long_term_direct(w_s: &Codeword, w_d: &Codeword, h_sd: &ChannelRealization) -> Result<LongTermMatrix> {
    let (n_d, n_s) = h_sd.shape();
    if w_s.len() != n_s || w_d.len() != n_d {
        return Err(Error::Dimension(format!(
            "long_term_direct: H_SD {n_d}x{n_s}, w_S {}, w_D {}",
            w_s.len(),
            w_d.len()
        )));
    }
    let terms = h_sd
        .per_cluster_matrix
        .iter()
        .map(|h| Ok(dotu(&w_d.weights, &h.mul_vec(&w_s.weights)?)))
        .collect::<Result<_>>()?;
    Ok(LongTermMatrix::Direct(terms))
}

fn phasors(dopplers: &[f64], delays: &[f64], t: f64, f: f64) -> Vec<Complex64> {
    dopplers
        .iter()
        .zip(delays)
        .map(|(v, tau)| cis(TAU * (v * t + tau * f)))
        .collect()
}

/// Frequency-selective received PSD at time `t`:
/// `tx(f) |sum_{n,m} L[n,m] e^{j2pi(v_n t + tau_n f)} e^{j2pi(v_m t + tau_m f)}|^2`.
///
/// For a direct link only the `_rd` lists are used and the sum runs over one
/// index.
#[allow(clippy::too_many_arguments)]
pub fn small_scale_psd(
    l: &LongTermMatrix,
    dopplers_rd: &[f64],
    dopplers_sr: &[f64],
    delays_rd: &[f64],
    delays_sr: &[f64],
    t: f64,
    grid: &SubbandGrid,
    tx_psd: &Psd,
) -> Result<Psd> {
    if tx_psd.grid != *grid {
        return Err(Error::Dimension("tx PSD grid differs".into()));
    }
    if dopplers_rd.len() != delays_rd.len() || dopplers_sr.len() != delays_sr.len() {
        return Err(Error::Dimension("delay and Doppler lists differ in length".into()));
    }
    let mut values = Vec::with_capacity(grid.n_subbands);
    match l {
        LongTermMatrix::Relayed(m) => {
            if m.rows() != dopplers_rd.len() || m.cols() != dopplers_sr.len() {
                return Err(Error::Dimension(format!(
                    "L is {}x{}, got {} RD and {} SR clusters",
                    m.rows(),
                    m.cols(),
                    dopplers_rd.len(),
                    dopplers_sr.len()
                )));
            }
            for (&f, tx) in grid.center_freqs.iter().zip(&tx_psd.values) {
                let p = phasors(dopplers_rd, delays_rd, t, f);
                let q = phasors(dopplers_sr, delays_sr, t, f);
                let mut acc = Complex64::new(0.0, 0.0);
                for (n, pn) in p.iter().enumerate() {
                    acc += pn * dotu(m.row(n), &q);
                }
                values.push(tx * acc.norm_sqr());
            }
        }
        LongTermMatrix::Direct(v) => {
            if v.len() != dopplers_rd.len() {
                return Err(Error::Dimension("direct L length differs from cluster count".into()));
            }
            for (&f, tx) in grid.center_freqs.iter().zip(&tx_psd.values) {
                let p = phasors(dopplers_rd, delays_rd, t, f);
                values.push(tx * dotu(v, &p).norm_sqr());
            }
        }
    }
    Ok(Psd {
        values,
        grid: grid.clone(),
    })
}

/// Total path loss of the two relay hops, dB.
pub fn cascade_gain_db(
    d_sr: f64,
    d_rd: f64,
    fc_ghz: f64,
    env_sr: &PathLossParams,
    env_rd: &PathLossParams,
) -> Result<f64> {
    Ok(path_loss_db(d_sr, fc_ghz, env_sr, None)? + path_loss_db(d_rd, fc_ghz, env_rd, None)?)
}

/// Received PSD of a relay-free link including path loss and blockage.
#[allow(clippy::too_many_arguments)]
pub fn direct_psd(
    w_s: &Codeword,
    w_d: &Codeword,
    h_sd: &ChannelRealization,
    t: f64,
    grid: &SubbandGrid,
    tx_psd: &Psd,
    path_loss_db: f64,
    blockage_db: f64,
) -> Result<Psd> {
    let l = long_term_direct(w_s, w_d, h_sd)?;
    let psd = small_scale_psd(&l, &h_sd.dopplers, &[], &h_sd.delays, &[], t, grid, tx_psd)?;
    Ok(psd.attenuated(path_loss_db + blockage_db))
}

/// Received PSD of a relayed link including the cascaded path loss.
#[allow(clippy::too_many_arguments)]
pub fn relayed_psd(
    w_s: &Codeword,
    w_d: &Codeword,
    phi: &RelayConfigMatrix,
    h_sr: &ChannelRealization,
    h_rd: &ChannelRealization,
    t: f64,
    grid: &SubbandGrid,
    tx_psd: &Psd,
    cascade_loss_db: f64,
) -> Result<Psd> {
    let l = long_term(w_s, w_d, phi, h_sr, h_rd)?;
    let psd = small_scale_psd(
        &l,
        &h_rd.dopplers,
        &h_sr.dopplers,
        &h_rd.delays,
        &h_sr.delays,
        t,
        grid,
        tx_psd,
    )?;
    Ok(psd.attenuated(cascade_loss_db))
}

/// How an interferer reaches the destination.
#[derive(Debug, Clone)]
pub enum InterferencePath {
    /// Line of sight toward the destination: `H_ID` directly.
    Direct { h_id: ChannelRealization, loss_db: f64 },
    /// Through the relay: `H_RD Phi H_IR`.
    Relayed {
        h_ir: ChannelRealization,
        h_rd: ChannelRealization,
        loss_db: f64,
    },
}

/// A co-channel transmitter with its own beam toward its own destination.
#[derive(Debug, Clone)]
pub struct Interferer {
    pub w_i: Codeword,
    pub tx_psd: Psd,
    pub path: InterferencePath,
}

/// Interference PSD of each interferer given the victim's fixed destination
/// beam and relay configuration.
pub fn interference_psd(
    interferers: &[Interferer],
    w_d: &Codeword,
    phi: &RelayConfigMatrix,
    grid: &SubbandGrid,
    t: f64,
) -> Result<Vec<Psd>> {
    interferers
        .iter()
        .map(|i| match &i.path {
            InterferencePath::Direct { h_id, loss_db } => {
                direct_psd(&i.w_i, w_d, h_id, t, grid, &i.tx_psd, *loss_db, 0.0)
            }
            InterferencePath::Relayed { h_ir, h_rd, loss_db } => {
                relayed_psd(&i.w_i, w_d, phi, h_ir, h_rd, t, grid, &i.tx_psd, *loss_db)
            }
        })
        .collect()
}

/// Per-subband SINR in dB; the relayed noise power is spread flat over the
/// band.
pub fn sinr_per_subband(rx: &Psd, interf: &[Psd], noise_psd: &Psd, af_noise_w: f64) -> Result<Vec<f64>> {
    rx.check_grid(noise_psd)?;
    for i in interf {
        rx.check_grid(i)?;
    }
    let af_psd = af_noise_w / rx.grid.bandwidth();
    Ok((0..rx.values.len())
        .map(|k| {
            let den = interf.iter().map(|i| i.values[k]).sum::<f64>() + noise_psd.values[k] + af_psd;
            lin_to_db(rx.values[k] / den)
        })
        .collect())
}

/// Exponential effective SINR mapping `-beta ln(mean exp(-Lambda / beta))`
/// over linear per-subband SINRs; returns dB.
pub fn effective_sinr(per_subband_db: &[f64], beta: f64) -> Result<f64> {
    if per_subband_db.is_empty() {
        return Err(Error::Invariant("effective SINR of an empty subband list".into()));
    }
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("EESM beta must be > 0, got {beta}")));
    }
    let lin: Vec<f64> = per_subband_db.iter().map(|&d| db_to_lin(d)).collect();
    let lo = lin.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lin.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // factor out the smallest subband so the exponentials never underflow
    let mean = lin.iter().map(|&x| (-(x - lo) / beta).exp()).sum::<f64>() / lin.len() as f64;
    let eff = (lo - beta * mean.ln()).clamp(lo, hi);
    Ok(lin_to_db(eff))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinrReport {
    pub per_subband_db: Vec<f64>,
    pub effective_db: f64,
    pub timestamp: f64,
}

impl SinrReport {
    pub fn new(per_subband_db: Vec<f64>, beta: f64, timestamp: f64) -> Result<Self> {
        let effective_db = effective_sinr(&per_subband_db, beta)?;
        Ok(Self {
            per_subband_db,
            effective_db,
            timestamp,
        })
    }

    /// Report for a link with no usable signal.
    pub fn silent(n_subbands: usize, timestamp: f64) -> Self {
        Self {
            per_subband_db: vec![f64::NEG_INFINITY; n_subbands],
            effective_db: f64::NEG_INFINITY,
            timestamp,
        }
    }

    pub fn min_db(&self) -> f64 {
        self.per_subband_db.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_db(&self) -> f64 {
        self.per_subband_db.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
