//! Independent reference implementations shared by the integration tests.
//!
//! Every oracle here works on explicit full matrices and plain loops so that
//! it shares no code path with the optimized library routines it checks.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaysim::antenna::{element_gain_db, Antenna, ArrayGeometry, Codebook, Codeword, ElementPattern, Orientation};
use relaysim::channel::{ChannelRealization, Cluster, ClusterSet, LinkKind, RayParams};
use relaysim::link_engine::CascadeBudget;
use relaysim::math::CMatrix;
use relaysim::relay::{RelayConfigMatrix, RelayKind, RelayNoise};
use relaysim::Complex64;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rand_c(r: &mut ChaCha8Rng) -> Complex64 {
    c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0))
}

pub fn rand_vec(r: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n).map(|_| rand_c(r)).collect()
}

pub fn rand_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| rand_c(r))
}

pub fn rand_codeword(r: &mut ChaCha8Rng, n: usize) -> Codeword {
    Codeword::new(rand_vec(r, n))
}

pub fn rand_codebook(r: &mut ChaCha8Rng, n_words: usize, len: usize) -> Codebook {
    Codebook {
        codewords: (0..n_words).map(|_| rand_codeword(r, len)).collect(),
        az_grid: vec![0.0; n_words],
        zen_grid: vec![0.0],
    }
}

/// Random multi-cluster realization with delays up to 300 ns and optional
/// Doppler shifts.
pub fn rand_realization(r: &mut ChaCha8Rng, n_clusters: usize, rows: usize, cols: usize, doppler: bool) -> ChannelRealization {
    let mats = (0..n_clusters).map(|_| rand_matrix(r, rows, cols)).collect();
    let delays = (0..n_clusters).map(|_| r.random_range(0.0..300e-9)).collect();
    let dopplers = (0..n_clusters)
        .map(|_| if doppler { r.random_range(-500.0..500.0) } else { 0.0 })
        .collect();
    ChannelRealization::from_matrices(mats, delays, dopplers).unwrap()
}

pub fn rand_phases(r: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| r.random_range(-PI..PI)).collect()
}

pub fn rand_relay(r: &mut ChaCha8Rng, n: usize) -> RelayConfigMatrix {
    let phases = rand_phases(r, n);
    if r.random_bool(0.5) {
        relaysim::relay::irs_matrix(phases)
    } else {
        relaysim::relay::af_matrix(phases, r.random_range(0.0..40.0)).unwrap()
    }
}

/// Cluster set with random angles, phases and unequal powers summing to one.
pub fn rand_clusters(r: &mut ChaCha8Rng, n_clusters: usize, n_rays: usize) -> ClusterSet {
    let raw: Vec<f64> = (0..n_clusters).map(|_| r.random_range(0.1..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let clusters = raw
        .iter()
        .map(|p| Cluster {
            power: p / total,
            delay: r.random_range(0.0..1e-6),
            doppler: 0.0,
            rays: (0..n_rays)
                .map(|_| RayParams {
                    aod_az: r.random_range(-PI..PI),
                    aod_zen: r.random_range(0.0..PI),
                    aoa_az: r.random_range(-PI..PI),
                    aoa_zen: r.random_range(0.0..PI),
                    phase: r.random_range(-PI..PI),
                })
                .collect(),
        })
        .collect();
    ClusterSet {
        clusters,
        link_kind: LinkKind::SR,
    }
}

pub fn rand_antenna(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> Antenna {
    let geom = ArrayGeometry::with_spacing(rows, cols, r.random_range(0.3..0.7))
        .unwrap()
        .oriented(Orientation::from_degrees(r.random_range(-180.0..180.0), r.random_range(60.0..120.0)));
    let pattern = if r.random_bool(0.5) {
        ElementPattern::tr38901()
    } else {
        ElementPattern::isotropic()
    };
    Antenna::new(geom, pattern)
}

fn unit(az: f64, zen: f64) -> [f64; 3] {
    [zen.sin() * az.cos(), zen.sin() * az.sin(), zen.cos()]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Element positions in wavelengths, built from the panel orientation alone.
fn positions(g: &ArrayGeometry) -> Vec<[f64; 3]> {
    let (az, zen) = (g.orientation.az, g.orientation.zen);
    let h = [-az.sin(), az.cos(), 0.0];
    let v = [-zen.cos() * az.cos(), -zen.cos() * az.sin(), zen.sin()];
    let mut out = Vec::new();
    for row in 0..g.rows_v {
        for col in 0..g.cols_h {
            let rv = (row as f64 - (g.rows_v as f64 - 1.0) / 2.0) * g.spacing;
            let ch = (col as f64 - (g.cols_h as f64 - 1.0) / 2.0) * g.spacing;
            out.push([h[0] * ch + v[0] * rv, h[1] * ch + v[1] * rv, h[2] * ch + v[2] * rv]);
        }
    }
    out
}

/// Field amplitude of an element toward global angles.
fn field(a: &Antenna, az: f64, zen: f64) -> f64 {
    if a.pattern.isotropic {
        return 1.0;
    }
    let g = &a.geometry;
    let (oaz, ozen) = (g.orientation.az, g.orientation.zen);
    let b = unit(oaz, ozen);
    let h = [-oaz.sin(), oaz.cos(), 0.0];
    let v = [-ozen.cos() * oaz.cos(), -ozen.cos() * oaz.sin(), ozen.sin()];
    let d = unit(az, zen);
    let (x, y, z) = (dot3(d, b), dot3(d, h), dot3(d, v));
    10f64.powf(element_gain_db(&a.pattern, y.atan2(x), z.clamp(-1.0, 1.0).acos()) / 20.0)
}

/// Direct term-by-term evaluation of the cluster matrices: one entry at a
/// time, one ray at a time.
pub fn naive_channel(set: &ClusterSet, tx: &Antenna, rx: &Antenna) -> Vec<CMatrix> {
    let ptx = positions(&tx.geometry);
    let prx = positions(&rx.geometry);
    set.clusters
        .iter()
        .map(|cl| {
            let scale = (cl.power / cl.rays.len() as f64).sqrt();
            CMatrix::from_fn(prx.len(), ptx.len(), |q, p| {
                let mut acc = c(0.0, 0.0);
                for ray in &cl.rays {
                    let ua = unit(ray.aoa_az, ray.aoa_zen);
                    let ud = unit(ray.aod_az, ray.aod_zen);
                    let amp = field(rx, ray.aoa_az, ray.aoa_zen) * field(tx, ray.aod_az, ray.aod_zen);
                    let phase = ray.phase + TAU * dot3(prx[q], ua) + TAU * dot3(ptx[p], ud);
                    acc += Complex64::from_polar(amp, phase);
                }
                acc * scale
            })
        })
        .collect()
}

/// Full diagonal relay matrix from its phases and gain.
pub fn relay_full(phi: &RelayConfigMatrix) -> Vec<Vec<Complex64>> {
    let g = match phi.kind {
        RelayKind::Irs => 1.0,
        RelayKind::Af => 10f64.powf(phi.amp_gain_db / 20.0),
    };
    let n = phi.phases.len();
    (0..n)
        .map(|k| {
            (0..n)
                .map(|l| if k == l { Complex64::from_polar(g, phi.phases[k]) } else { c(0.0, 0.0) })
                .collect()
        })
        .collect()
}

/// `L[n, m] = sum_{d,k,l,s} w_D[d] H_RD,n[d,k] Phi[k,l] H_SR,m[l,s] w_S[s]`.
pub fn naive_long_term(
    w_s: &Codeword,
    w_d: &Codeword,
    phi: &RelayConfigMatrix,
    h_sr: &ChannelRealization,
    h_rd: &ChannelRealization,
) -> Vec<Vec<Complex64>> {
    let full = relay_full(phi);
    let (n_r, n_s) = h_sr.shape();
    let n_d = h_rd.shape().0;
    h_rd.per_cluster_matrix
        .iter()
        .map(|hr| {
            h_sr.per_cluster_matrix
                .iter()
                .map(|hs| {
                    let mut acc = c(0.0, 0.0);
                    for d in 0..n_d {
                        for k in 0..n_r {
                            for l in 0..n_r {
                                for s in 0..n_s {
                                    acc += w_d.weights[d] * hr[(d, k)] * full[k][l] * hs[(l, s)] * w_s.weights[s];
                                }
                            }
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

fn sum_clusters(h: &ChannelRealization) -> CMatrix {
    let (r, cc) = h.shape();
    CMatrix::from_fn(r, cc, |i, j| h.per_cluster_matrix.iter().map(|m| m[(i, j)]).sum())
}

/// `sigma2 * w^T H Phi Phi^H H^H conj(w)` by explicit matrix products.
pub fn naive_af_noise(w_d: &Codeword, h_rd: &ChannelRealization, phi: &RelayConfigMatrix, noise: &RelayNoise) -> f64 {
    if phi.kind == RelayKind::Irs {
        return 0.0;
    }
    let h = sum_clusters(h_rd);
    let full = relay_full(phi);
    let (n_d, n_r) = h.shape();
    // a = w^T H Phi (row vector)
    let a: Vec<Complex64> = (0..n_r)
        .map(|l| {
            (0..n_r)
                .map(|k| (0..n_d).map(|d| w_d.weights[d] * h[(d, k)]).sum::<Complex64>() * full[k][l])
                .sum()
        })
        .collect();
    // a a^H
    a.iter().map(|x| x * x.conj()).sum::<Complex64>().re * noise.sigma2
}

/// Long-term SNR of one configuration by explicit products.
pub fn naive_snr(
    w_s: &Codeword,
    w_d: &Codeword,
    phi: &RelayConfigMatrix,
    h_sr: &ChannelRealization,
    h_rd: &ChannelRealization,
    budget: &CascadeBudget,
    noise: &RelayNoise,
) -> f64 {
    let sr = sum_clusters(h_sr);
    let rd = sum_clusters(h_rd);
    let full = relay_full(phi);
    let (n_r, n_s) = sr.shape();
    let n_d = rd.rows();
    let mut y = c(0.0, 0.0);
    for d in 0..n_d {
        for k in 0..n_r {
            for l in 0..n_r {
                for s in 0..n_s {
                    y += w_d.weights[d] * rd[(d, k)] * full[k][l] * sr[(l, s)] * w_s.weights[s];
                }
            }
        }
    }
    let relay_n = naive_af_noise(w_d, h_rd, phi, noise);
    budget.tx_power_w * budget.gain_sr * budget.gain_rd * y.norm_sqr() / (budget.noise_w + budget.gain_rd * relay_n)
}

/// Exhaustive enumeration. Values within `tie_rel` of the maximum count as
/// tied and resolve to the first triple in `(s, d, phi)` lexicographic order.
#[allow(clippy::too_many_arguments)]
pub fn brute_force_sweep(
    cb_s: &Codebook,
    cb_d: &Codebook,
    cb_phi: &[RelayConfigMatrix],
    h_sr: &ChannelRealization,
    h_rd: &ChannelRealization,
    budget: &CascadeBudget,
    noise: &RelayNoise,
    tie_rel: f64,
) -> ((usize, usize, usize), f64) {
    let mut all = Vec::new();
    for s in 0..cb_s.len() {
        for d in 0..cb_d.len() {
            for p in 0..cb_phi.len() {
                let v = naive_snr(&cb_s.codewords[s], &cb_d.codewords[d], &cb_phi[p], h_sr, h_rd, budget, noise);
                all.push(((s, d, p), v));
            }
        }
    }
    let max = all.iter().map(|a| a.1).fold(f64::NEG_INFINITY, f64::max);
    *all.iter().find(|a| a.1 >= max * (1.0 - tie_rel)).expect("non-empty")
}

pub fn max_rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().map(|x| x.norm()).fold(0.0, f64::max).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).norm() / scale).fold(0.0, f64::max)
}

/// Worst relative error of `assemble_channel` against [`naive_channel`] on
/// one random instance with arrays up to `max_dim x max_dim`.
pub fn assemble_case(seed: u64, max_dim: usize) -> f64 {
    use relaysim::channel::{assemble_channel, CoherenceWindow};
    let mut r = rng(seed);
    let dims: Vec<usize> = (0..4).map(|_| r.random_range(1..=max_dim)).collect();
    let tx = rand_antenna(&mut r, dims[0], dims[1]);
    let rx = rand_antenna(&mut r, dims[2], dims[3]);
    let (n_c, n_m) = (r.random_range(1..=4), r.random_range(1..=6));
    let set = rand_clusters(&mut r, n_c, n_m);
    let fast = assemble_channel(&set, &tx, &rx, CoherenceWindow::new(0.0, 0.1)).unwrap();
    let slow = naive_channel(&set, &tx, &rx);
    fast.per_cluster_matrix
        .iter()
        .zip(&slow)
        .map(|(a, b)| max_rel_err(a.as_slice(), b.as_slice()))
        .fold(0.0, f64::max)
}

/// Worst relative error of `long_term` against [`naive_long_term`].
pub fn long_term_case(seed: u64) -> f64 {
    use relaysim::link_engine::{long_term, LongTermMatrix};
    let mut r = rng(seed);
    let (n_s, n_r, n_d) = (r.random_range(1..=4), r.random_range(1..=6), r.random_range(1..=4));
    let (c_sr, c_rd) = (r.random_range(1..=3), r.random_range(1..=3));
    let h_sr = rand_realization(&mut r, c_sr, n_r, n_s, false);
    let h_rd = rand_realization(&mut r, c_rd, n_d, n_r, false);
    let (w_s, w_d) = (rand_codeword(&mut r, n_s), rand_codeword(&mut r, n_d));
    let phi = rand_relay(&mut r, n_r);
    let LongTermMatrix::Relayed(fast) = long_term(&w_s, &w_d, &phi, &h_sr, &h_rd).unwrap() else {
        panic!("relayed long-term matrix expected");
    };
    let slow: Vec<Complex64> = naive_long_term(&w_s, &w_d, &phi, &h_sr, &h_rd).concat();
    max_rel_err(fast.as_slice(), &slow)
}

/// Relative error of `af_relayed_noise_power` against [`naive_af_noise`].
pub fn af_noise_case(seed: u64) -> f64 {
    use relaysim::relay::af_relayed_noise_power;
    let mut r = rng(seed);
    let (n_d, n_r) = (r.random_range(1..=4), r.random_range(1..=8));
    let c_rd = r.random_range(1..=3);
    let h_rd = rand_realization(&mut r, c_rd, n_d, n_r, false);
    let w_d = rand_codeword(&mut r, n_d);
    let gain = r.random_range(0.0..40.0);
    let phi = relaysim::relay::af_matrix(rand_phases(&mut r, n_r), gain).unwrap();
    let noise = RelayNoise {
        sigma2: r.random_range(1e-13..1e-9),
        noise_figure_db: 5.0,
    };
    let fast = af_relayed_noise_power(&w_d, &h_rd, &phi, &noise).unwrap();
    let slow = naive_af_noise(&w_d, &h_rd, &phi, &noise);
    (fast - slow).abs() / slow.abs().max(1e-300)
}

/// Whether `sweep` picks the brute-force argmax on a random 3x3x3 instance.
pub fn sweep_case(seed: u64) -> bool {
    use relaysim::link_engine::{sweep, SWEEP_TIE_REL};
    let mut r = rng(seed);
    let (n_s, n_r, n_d) = (r.random_range(1..=4), r.random_range(1..=5), r.random_range(1..=3));
    let h_sr = rand_realization(&mut r, 2, n_r, n_s, false);
    let h_rd = rand_realization(&mut r, 2, n_d, n_r, false);
    let cb_s = rand_codebook(&mut r, 3, n_s);
    let cb_d = rand_codebook(&mut r, 3, n_d);
    let af = r.random_bool(0.5);
    let cb_phi: Vec<RelayConfigMatrix> = (0..3)
        .map(|_| {
            let ph = rand_phases(&mut r, n_r);
            if af {
                relaysim::relay::af_matrix(ph, 30.0).unwrap()
            } else {
                relaysim::relay::irs_matrix(ph)
            }
        })
        .collect();
    let budget = CascadeBudget {
        tx_power_w: 2.0,
        gain_sr: 1e-6,
        gain_rd: 1e-5,
        noise_w: 1e-12,
    };
    let noise = RelayNoise {
        sigma2: 1e-12,
        noise_figure_db: 5.0,
    };
    let got = sweep(&cb_s, &cb_d, &cb_phi, &h_sr, &h_rd, &budget, &noise).unwrap();
    let (want, _) = brute_force_sweep(&cb_s, &cb_d, &cb_phi, &h_sr, &h_rd, &budget, &noise, SWEEP_TIE_REL);
    (got.w_s_idx, got.w_d_idx, got.phi_idx) == want
}

pub fn scenario_path(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

/// `| ||Phi x|| - ||x|| | / ||x||` for a random IRS configuration.
pub fn irs_isometry_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    let n = r.random_range(1..=64);
    let phi = relaysim::relay::irs_matrix(rand_phases(&mut r, n));
    let x = rand_vec(&mut r, n);
    let y = phi.apply(&x).unwrap();
    let nx = relaysim::math::norm_sqr(&x).sqrt();
    let ny = relaysim::math::norm_sqr(&y).sqrt();
    (nx - ny).abs() / nx
}

/// `|sum P_n - 1|` for a drawn cluster set on a random link.
pub fn power_normalization_case(seed: u64) -> f64 {
    use relaysim::channel::{draw_clusters, ChannelProfile, Environment, LinkGeometry};
    use relaysim::math::Vec3;
    let mut r = rng(seed);
    let env = if r.random_bool(0.5) { Environment::UmaLos } else { Environment::UmaNlos };
    let mut profile = ChannelProfile::defaults(env);
    profile.n_clusters = r.random_range(1..=24);
    profile.n_rays = r.random_range(1..=24);
    let tx = Vec3::new(r.random_range(-100.0..100.0), r.random_range(-100.0..100.0), 25.0);
    let rx = Vec3::new(r.random_range(-100.0..100.0), r.random_range(-100.0..100.0), 1.5);
    let set = draw_clusters(&mut r, LinkKind::SD, &profile, &LinkGeometry::between(tx, rx, 28e9)).unwrap();
    (set.total_power() - 1.0).abs()
}

/// Whether the EESM output lies within the per-subband extremes.
pub fn eesm_bounds_case(seed: u64) -> bool {
    use relaysim::link_engine::effective_sinr;
    let mut r = rng(seed);
    let n = r.random_range(1..=64);
    let spread = r.random_range(0.0..60.0);
    let base = r.random_range(-30.0..40.0);
    let v: Vec<f64> = (0..n).map(|_| base + r.random_range(0.0..=spread)).collect();
    let beta = r.random_range(0.1..20.0);
    let e = effective_sinr(&v, beta).unwrap();
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    e >= lo - 1e-9 && e <= hi + 1e-9
}

fn psd_rel_diff(a: &relaysim::link_engine::Psd, b: &relaysim::link_engine::Psd) -> f64 {
    let scale = a.values.iter().copied().fold(0.0, f64::max).max(1e-300);
    a.values
        .iter()
        .zip(&b.values)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

/// Worst relative PSD change when every channel, codeword and relay
/// configuration picks up an independent global phase.
pub fn phase_invariance_case(seed: u64) -> f64 {
    use relaysim::link_engine::{direct_psd, interference_psd, relayed_psd, InterferencePath, Interferer, Psd, SubbandGrid};
    let mut r = rng(seed);
    let grid = SubbandGrid::new(r.random_range(1..=16), 100e6).unwrap();
    let tx_psd = Psd::flat(&grid, 2.0);
    let (n_s, n_r, n_d) = (r.random_range(1..=4), r.random_range(1..=6), r.random_range(1..=3));
    let h_sr = rand_realization(&mut r, 3, n_r, n_s, true);
    let h_rd = rand_realization(&mut r, 2, n_d, n_r, true);
    let h_sd = rand_realization(&mut r, 4, n_d, n_s, true);
    let (w_s, w_d) = (rand_codeword(&mut r, n_s), rand_codeword(&mut r, n_d));
    let phi = rand_relay(&mut r, n_r);
    let t = r.random_range(0.0..0.1);
    let a: Vec<f64> = (0..6).map(|_| r.random_range(-PI..PI)).collect();
    let rot = |x: f64| Complex64::from_polar(1.0, x);

    let d0 = direct_psd(&w_s, &w_d, &h_sd, t, &grid, &tx_psd, 90.0, 0.0).unwrap();
    let d1 = direct_psd(&w_s.rotated(a[0]), &w_d.rotated(a[1]), &h_sd.scaled(rot(a[2])), t, &grid, &tx_psd, 90.0, 0.0).unwrap();
    let r0 = relayed_psd(&w_s, &w_d, &phi, &h_sr, &h_rd, t, &grid, &tx_psd, 180.0).unwrap();
    let r1 = relayed_psd(
        &w_s.rotated(a[0]),
        &w_d.rotated(a[1]),
        &phi.rotated(a[3]),
        &h_sr.scaled(rot(a[4])),
        &h_rd.scaled(rot(a[5])),
        t,
        &grid,
        &tx_psd,
        180.0,
    )
    .unwrap();
    let interferers = |sr: &ChannelRealization, rd: &ChannelRealization, sd: &ChannelRealization, w: &Codeword| {
        vec![
            Interferer {
                w_i: w.clone(),
                tx_psd: tx_psd.clone(),
                path: InterferencePath::Direct { h_id: sd.clone(), loss_db: 100.0 },
            },
            Interferer {
                w_i: w.clone(),
                tx_psd: tx_psd.clone(),
                path: InterferencePath::Relayed {
                    h_ir: sr.clone(),
                    h_rd: rd.clone(),
                    loss_db: 190.0,
                },
            },
        ]
    };
    let i0 = interference_psd(&interferers(&h_sr, &h_rd, &h_sd, &w_s), &w_d, &phi, &grid, t).unwrap();
    let i1 = interference_psd(
        &interferers(&h_sr.scaled(rot(a[4])), &h_rd.scaled(rot(a[5])), &h_sd.scaled(rot(a[2])), &w_s.rotated(a[0])),
        &w_d.rotated(a[1]),
        &phi.rotated(a[3]),
        &grid,
        t,
    )
    .unwrap();
    let mut worst = psd_rel_diff(&d0, &d1).max(psd_rel_diff(&r0, &r1));
    for (x, y) in i0.iter().zip(&i1) {
        worst = worst.max(psd_rel_diff(x, y));
    }
    worst
}

/// Checks packet bookkeeping of a finished run; returns a description of
/// the first violation.
pub fn packet_conservation(setup: &relaysim::sim::SimSetup, out: &relaysim::sim::RunOutput, duration_s: f64) -> Result<(), String> {
    use relaysim::traffic::{generate_arrivals, PacketStatus};
    use std::collections::BTreeSet;
    let ids: BTreeSet<u64> = out.packets.iter().map(|p| p.id).collect();
    if ids.len() != out.packets.len() {
        return Err("duplicate packet ids".into());
    }
    let src = setup.traffic.source();
    for &ue in &out.ues {
        let expected = generate_arrivals(&src, ue, 0.0, duration_s, 0).len() as u64;
        let mine: Vec<_> = out.packets.iter().filter(|p| p.ue == ue).collect();
        let m = &out.summary.per_ue[&ue];
        if mine.len() as u64 != expected || m.generated != expected {
            return Err(format!("UE {ue}: {} packets recorded, {} expected", mine.len(), expected));
        }
        if m.delivered + m.lost + m.pending != m.generated {
            return Err(format!("UE {ue}: delivered + lost + pending != generated ({m:?})"));
        }
        for p in mine {
            match (p.status, p.t_rx) {
                (PacketStatus::Delivered, Some(rx)) if rx >= p.t_gen && rx <= duration_s + 1e-9 => {}
                (PacketStatus::Delivered, _) => return Err(format!("packet {} has a bad delivery time", p.id)),
                (_, Some(_)) => return Err(format!("undelivered packet {} has a delivery time", p.id)),
                _ => {}
            }
        }
    }
    let s = out.tb_stats;
    if s.created != s.delivered + s.dropped + s.in_flight_at_end {
        return Err(format!("transport blocks not conserved: {s:?}"));
    }
    Ok(())
}

/// Everything a run emits, with floats compared bit for bit.
pub fn run_fingerprint(out: &relaysim::sim::RunOutput) -> String {
    let mut s = String::new();
    for p in &out.packets {
        s += &format!("{}|{}|{}|{:x}|{:?}|{:?}|{}\n", p.id, p.ue, p.bytes, p.t_gen.to_bits(), p.t_rx.map(f64::to_bits), p.status, p.attempts);
    }
    for row in &out.trace.rows {
        s += &format!("{:x}|{}|{:x}\n", row.t_s.to_bits(), row.ue, row.eff_sinr_db.to_bits());
    }
    s += &serde_json::to_string(&out.summary).unwrap();
    s += &format!("{:?}", out.tb_stats);
    s
}
