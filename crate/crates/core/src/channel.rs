//! Stochastic cluster channel model, MIMO channel assembly and the
//! frequency-flat path loss law.
//!
//! Each link is a superposition of clusters; each cluster holds rays with
//! their own departure/arrival angles and a random initial phase. A single
//! polarization is modelled, so every ray carries one phase term.
//! Delays and Doppler shifts are kept beside the per-cluster matrices and
//! applied later by the link engine.

use std::f64::consts::{PI, TAU};
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::antenna::Antenna;
use crate::math::{wrap_pi, CMatrix, Vec3};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    /// source -> relay
    SR,
    /// relay -> destination
    RD,
    /// source -> destination
    SD,
    /// interferer -> relay
    IR,
    /// interferer -> destination
    ID,
}

/// Propagation environment profile key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Environment {
    UmaLos,
    UmaNlos,
}

impl FromStr for Environment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uma_los" => Ok(Environment::UmaLos),
            "uma_nlos" => Ok(Environment::UmaNlos),
            other => Err(Error::config("environment", format!("unknown environment `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayParams {
    pub aod_az: f64,
    pub aod_zen: f64,
    pub aoa_az: f64,
    pub aoa_zen: f64,
    /// Initial phase in `[-pi, pi]`.
    pub phase: f64,
}

impl RayParams {
    pub fn aod(&self) -> Vec3 {
        Vec3::from_angles(self.aod_az, self.aod_zen)
    }

    pub fn aoa(&self) -> Vec3 {
        Vec3::from_angles(self.aoa_az, self.aoa_zen)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Fraction of the link power.
    pub power: f64,
    /// Excess delay, seconds.
    pub delay: f64,
    /// Doppler shift, Hz.
    pub doppler: f64,
    pub rays: Vec<RayParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub clusters: Vec<Cluster>,
    pub link_kind: LinkKind,
}

impl ClusterSet {
    pub fn total_power(&self) -> f64 {
        self.clusters.iter().map(|c| c.power).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.clusters.is_empty() {
            return Err(Error::Invariant("cluster set is empty".into()));
        }
        if (self.total_power() - 1.0).abs() > 1e-9 {
            return Err(Error::Invariant(format!(
                "cluster powers sum to {}",
                self.total_power()
            )));
        }
        for c in &self.clusters {
            if c.power < 0.0 || c.delay < 0.0 || c.rays.is_empty() {
                return Err(Error::Invariant("malformed cluster".into()));
            }
        }
        Ok(())
    }
}

/// Coefficients of `PL = A log10(d) + B + C log10(fc_GHz) + X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    /// Standard deviation of the optional shadowing term, dB.
    pub shadow_sigma: f64,
}

impl PathLossParams {
    pub const UMA_LOS: PathLossParams = PathLossParams {
        a: 22.0,
        b: 28.0,
        c: 20.0,
        shadow_sigma: 4.0,
    };

    pub const UMA_NLOS: PathLossParams = PathLossParams {
        a: 39.08,
        b: 13.54,
        c: 20.0,
        shadow_sigma: 6.0,
    };

    pub fn for_env(env: Environment) -> Self {
        match env {
            Environment::UmaLos => Self::UMA_LOS,
            Environment::UmaNlos => Self::UMA_NLOS,
        }
    }
}

/// Path loss in dB. `fc_ghz` must lie in the 0.5-100 GHz validity range.
pub fn path_loss_db(d: f64, fc_ghz: f64, env: &PathLossParams, shadow_draw: Option<f64>) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::Domain(format!("path loss distance must be > 0, got {d}")));
    }
    if !(0.5..=100.0).contains(&fc_ghz) {
        return Err(Error::Domain(format!("carrier {fc_ghz} GHz outside [0.5, 100]")));
    }
    Ok(env.a * d.log10() + env.b + env.c * fc_ghz.log10() + shadow_draw.unwrap_or(0.0))
}

/// Statistical parameters of a cluster draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelProfile {
    pub n_clusters: usize,
    pub n_rays: usize,
    pub delay_spread_s: f64,
    /// Power decay between consecutive clusters, dB.
    pub decay_db: f64,
    /// Intra-cluster azimuth spread of ray angles, degrees.
    pub asd_deg: f64,
    /// Intra-cluster zenith spread of ray angles, degrees.
    pub zsd_deg: f64,
    /// Spread of cluster mean azimuths around the LOS direction, degrees.
    pub cluster_az_spread_deg: f64,
    /// Spread of cluster mean zeniths around the LOS direction, degrees.
    pub cluster_zen_spread_deg: f64,
    /// Ricean factor of the specular LOS ray; `None` for NLOS profiles.
    pub k_factor_db: Option<f64>,
    pub coherence_s: f64,
    /// Shadowing standard deviation; 0 disables shadowing.
    pub shadow_sigma_db: f64,
    /// Speed of the mobile endpoint, m/s; 0 means no Doppler.
    pub ue_speed_mps: f64,
}

impl Default for ChannelProfile {
    fn default() -> Self {
        Self::defaults(Environment::UmaNlos)
    }
}

impl ChannelProfile {
    pub fn defaults(env: Environment) -> Self {
        let (delay_spread_s, k_factor_db) = match env {
            Environment::UmaLos => (50e-9, Some(9.0)),
            Environment::UmaNlos => (100e-9, None),
        };
        Self {
            n_clusters: 20,
            n_rays: 20,
            delay_spread_s,
            decay_db: 3.0,
            asd_deg: 10.0,
            zsd_deg: 5.0,
            cluster_az_spread_deg: 30.0,
            cluster_zen_spread_deg: 10.0,
            k_factor_db,
            coherence_s: 0.1,
            shadow_sigma_db: 0.0,
            ue_speed_mps: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.n_rays == 0 {
            return Err(Error::config("channel.n_clusters", "cluster and ray counts must be >= 1"));
        }
        if !(self.delay_spread_s >= 0.0) {
            return Err(Error::config("channel.delay_spread_s", "must be >= 0"));
        }
        if !(self.coherence_s > 0.0) {
            return Err(Error::config("channel.coherence_s", "must be > 0"));
        }
        if !(self.shadow_sigma_db >= 0.0) || !(self.ue_speed_mps >= 0.0) {
            return Err(Error::config("channel", "shadow sigma and UE speed must be >= 0"));
        }
        if self.asd_deg < 0.0 || self.zsd_deg < 0.0 {
            return Err(Error::config("channel.asd_deg", "angular spreads must be >= 0"));
        }
        Ok(())
    }
}

/// Geometric context of a link draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    /// Unit direction from the transmitter toward the receiver.
    pub los_aod: Vec3,
    /// Unit direction from the receiver toward the transmitter.
    pub los_aoa: Vec3,
    pub carrier_hz: f64,
}

impl LinkGeometry {
    pub fn between(tx: Vec3, rx: Vec3, carrier_hz: f64) -> Self {
        let d = (rx - tx).normalized();
        Self {
            los_aod: d,
            los_aoa: d.scale(-1.0),
            carrier_hz,
        }
    }
}

/// Folds a zenith angle back into `[0, pi]`.
fn fold_zenith(z: f64) -> f64 {
    let z = z.rem_euclid(TAU);
    if z > PI {
        TAU - z
    } else {
        z
    }
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma_deg: f64) -> f64 {
    if sigma_deg == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma_deg.to_radians())
        .expect("finite spread")
        .sample(rng)
}

/// Draws the cluster parameters of one link.
///
/// Delays are exponential with mean `delay_spread_s`, shifted so the first
/// cluster arrives at zero excess delay. Cluster powers decay by `decay_db`
/// per cluster in delay order. LOS profiles put a fraction `K/(K+1)` of the
/// power into a single specular ray along the geometric direction.
pub fn draw_clusters<R: Rng + ?Sized>(
    rng: &mut R,
    link_kind: LinkKind,
    profile: &ChannelProfile,
    geom: &LinkGeometry,
) -> Result<ClusterSet> {
    profile.validate()?;
    let n = profile.n_clusters;
    let (los_d_az, los_d_zen) = geom.los_aod.angles();
    let (los_a_az, los_a_zen) = geom.los_aoa.angles();

    let mut delays: Vec<f64> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            -profile.delay_spread_s * (1.0 - u).ln()
        })
        .collect();
    delays.sort_by(f64::total_cmp);
    let first = delays[0];
    for d in &mut delays {
        *d -= first;
    }

    let specular_frac = profile
        .k_factor_db
        .map(|k| {
            let k = crate::db_to_lin(k);
            k / (k + 1.0)
        })
        .unwrap_or(0.0);
    let n_diffuse = if profile.k_factor_db.is_some() { n - 1 } else { n };
    let decay: Vec<f64> = (0..n_diffuse)
        .map(|i| 10f64.powf(-profile.decay_db * i as f64 / 10.0))
        .collect();
    let decay_sum: f64 = decay.iter().sum();
    let diffuse_power = if n_diffuse == 0 { 0.0 } else { 1.0 - specular_frac };
    let specular_power = if n_diffuse == 0 { 1.0 } else { specular_frac };

    let doppler_max = profile.ue_speed_mps * geom.carrier_hz / crate::SPEED_OF_LIGHT;
    let draw_doppler = |rng: &mut R| {
        if doppler_max > 0.0 {
            doppler_max * (TAU * rng.random::<f64>()).cos()
        } else {
            0.0
        }
    };

    let mut clusters = Vec::with_capacity(n);
    let mut delay_iter = delays.into_iter();
    if profile.k_factor_db.is_some() {
        let phase = wrap_pi(rng.random_range(-PI..PI));
        clusters.push(Cluster {
            power: specular_power,
            delay: delay_iter.next().expect("n >= 1"),
            doppler: draw_doppler(rng),
            rays: vec![RayParams {
                aod_az: los_d_az,
                aod_zen: los_d_zen,
                aoa_az: los_a_az,
                aoa_zen: los_a_zen,
                phase,
            }],
        });
    }
    for (i, delay) in delay_iter.enumerate() {
        let mean_d_az = los_d_az + gaussian(rng, profile.cluster_az_spread_deg);
        let mean_d_zen = los_d_zen + gaussian(rng, profile.cluster_zen_spread_deg);
        let mean_a_az = los_a_az + gaussian(rng, profile.cluster_az_spread_deg);
        let mean_a_zen = los_a_zen + gaussian(rng, profile.cluster_zen_spread_deg);
        let rays = (0..profile.n_rays)
            .map(|_| RayParams {
                aod_az: wrap_pi(mean_d_az + gaussian(rng, profile.asd_deg)),
                aod_zen: fold_zenith(mean_d_zen + gaussian(rng, profile.zsd_deg)),
                aoa_az: wrap_pi(mean_a_az + gaussian(rng, profile.asd_deg)),
                aoa_zen: fold_zenith(mean_a_zen + gaussian(rng, profile.zsd_deg)),
                phase: rng.random_range(-PI..PI),
            })
            .collect();
        clusters.push(Cluster {
            power: diffuse_power * decay[i] / decay_sum,
            delay,
            doppler: draw_doppler(rng),
            rays,
        });
    }
    let set = ClusterSet {
        clusters,
        link_kind,
    };
    set.validate()?;
    Ok(set)
}

/// Validity window of a channel realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoherenceWindow {
    pub generated_at: f64,
    pub coherence_s: f64,
}

impl CoherenceWindow {
    pub fn new(generated_at: f64, coherence_s: f64) -> Self {
        Self {
            generated_at,
            coherence_s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    /// One `N_rx x N_tx` matrix per cluster.
    pub per_cluster_matrix: Vec<CMatrix>,
    pub delays: Vec<f64>,
    pub dopplers: Vec<f64>,
    pub generated_at: f64,
    pub coherence_until: f64,
}

impl ChannelRealization {
    pub fn n_clusters(&self) -> usize {
        self.per_cluster_matrix.len()
    }

    /// `(N_rx, N_tx)`.
    pub fn shape(&self) -> (usize, usize) {
        self.per_cluster_matrix[0].shape()
    }

    /// Delay- and Doppler-free sum of the cluster matrices.
    pub fn long_term(&self) -> CMatrix {
        let (r, c) = self.shape();
        let mut sum = CMatrix::zeros(r, c);
        for m in &self.per_cluster_matrix {
            sum.add_assign(m);
        }
        sum
    }

    /// Realization with every matrix multiplied by `s`.
    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            per_cluster_matrix: self.per_cluster_matrix.iter().map(|m| m.scaled(s)).collect(),
            ..self.clone()
        }
    }

    /// Builds a realization from explicit matrices (synthetic channels).
    pub fn from_matrices(
        per_cluster_matrix: Vec<CMatrix>,
        delays: Vec<f64>,
        dopplers: Vec<f64>,
    ) -> Result<Self> {
        let n = per_cluster_matrix.len();
        if n == 0 || delays.len() != n || dopplers.len() != n {
            return Err(Error::Dimension(format!(
                "{n} matrices, {} delays, {} dopplers",
                delays.len(),
                dopplers.len()
            )));
        }
        let shape = per_cluster_matrix[0].shape();
        if per_cluster_matrix.iter().any(|m| m.shape() != shape) {
            return Err(Error::Dimension("cluster matrices differ in shape".into()));
        }
        Ok(Self {
            per_cluster_matrix,
            delays,
            dopplers,
            generated_at: 0.0,
            coherence_until: f64::INFINITY,
        })
    }
}

/// Assembles per-cluster MIMO matrices:
/// `H_n[q, p] = sqrt(P_n / M_n) sum_m F_rx F_tx e^{j phi_m} a_rx,q a_tx,p`.
pub fn assemble_channel(
    clusters: &ClusterSet,
    tx: &Antenna,
    rx: &Antenna,
    window: CoherenceWindow,
) -> Result<ChannelRealization> {
    tx.geometry.validate()?;
    rx.geometry.validate()?;
    let (n_rx, n_tx) = (rx.n_elements(), tx.n_elements());
    let mut per_cluster_matrix = Vec::with_capacity(clusters.clusters.len());
    for cluster in &clusters.clusters {
        let mut h = CMatrix::zeros(n_rx, n_tx);
        let amp = (cluster.power / cluster.rays.len() as f64).sqrt();
        // Per ray: rx manifold column and coefficient-scaled tx manifold row,
        // the latter split into real and imaginary parts so the inner loop
        // vectorizes.
        let n_rays = cluster.rays.len();
        let mut a_rx = Vec::with_capacity(n_rays);
        let mut t_re = Vec::with_capacity(n_rays * n_tx);
        let mut t_im = Vec::with_capacity(n_rays * n_tx);
        for ray in &cluster.rays {
            let (aod, aoa) = (ray.aod(), ray.aoa());
            let coeff = Complex64::from_polar(
                amp * rx.field_toward(aoa) * tx.field_toward(aod),
                ray.phase,
            );
            a_rx.push(rx.geometry.manifold(aoa));
            for a in tx.geometry.manifold(aod) {
                let t = a * coeff;
                t_re.push(t.re);
                t_im.push(t.im);
            }
        }
        let mut acc_re = vec![0.0; n_tx];
        let mut acc_im = vec![0.0; n_tx];
        for q in 0..n_rx {
            acc_re.fill(0.0);
            acc_im.fill(0.0);
            for (r, a) in a_rx.iter().enumerate() {
                let (ar, ai) = (a[q].re, a[q].im);
                let tr = &t_re[r * n_tx..(r + 1) * n_tx];
                let ti = &t_im[r * n_tx..(r + 1) * n_tx];
                for p in 0..n_tx {
                    acc_re[p] += ar * tr[p] - ai * ti[p];
                    acc_im[p] += ar * ti[p] + ai * tr[p];
                }
            }
            for (p, hq) in h.row_mut(q).iter_mut().enumerate() {
                *hq = Complex64::new(acc_re[p], acc_im[p]);
            }
        }
        per_cluster_matrix.push(h);
    }
    Ok(ChannelRealization {
        per_cluster_matrix,
        delays: clusters.clusters.iter().map(|c| c.delay).collect(),
        dopplers: clusters.clusters.iter().map(|c| c.doppler).collect(),
        generated_at: window.generated_at,
        coherence_until: window.generated_at + window.coherence_s,
    })
}

/// A realization is stale from `coherence_until` onward (inclusive).
pub fn is_expired(r: &ChannelRealization, now: f64) -> bool {
    now >= r.coherence_until
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::antenna::{ArrayGeometry, ElementPattern};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn geom() -> LinkGeometry {
        LinkGeometry::between(Vec3::new(0.0, 0.0, 10.0), Vec3::new(80.0, 30.0, 1.5), 28e9)
    }

    #[test]
    fn powers_are_normalized() {
        for env in [Environment::UmaLos, Environment::UmaNlos] {
            for seed in 0..20 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let cs = draw_clusters(&mut rng, LinkKind::SR, &ChannelProfile::defaults(env), &geom()).unwrap();
                assert_relative_eq!(cs.total_power(), 1.0, epsilon = 1e-9);
                assert_eq!(cs.clusters.len(), 20);
            }
        }
    }

    #[test]
    fn degenerate_profile_is_single_unit_cluster() {
        let profile = ChannelProfile {
            n_clusters: 1,
            n_rays: 1,
            k_factor_db: None,
            ..ChannelProfile::defaults(Environment::UmaNlos)
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cs = draw_clusters(&mut rng, LinkKind::SD, &profile, &geom()).unwrap();
        assert_eq!(cs.clusters.len(), 1);
        assert_eq!(cs.clusters[0].rays.len(), 1);
        assert_relative_eq!(cs.clusters[0].power, 1.0, epsilon = 1e-15);
        assert_eq!(cs.clusters[0].delay, 0.0);
    }

    #[test]
    fn unknown_environment_is_a_config_error() {
        assert!(matches!("uma_los".parse::<Environment>(), Ok(Environment::UmaLos)));
        assert!(matches!("rural".parse::<Environment>(), Err(Error::Config { .. })));
    }

    #[test]
    fn zenith_and_azimuth_ranges_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cs = draw_clusters(&mut rng, LinkKind::RD, &ChannelProfile::defaults(Environment::UmaNlos), &geom()).unwrap();
        for r in cs.clusters.iter().flat_map(|c| &c.rays) {
            for z in [r.aod_zen, r.aoa_zen] {
                assert!((0.0..=PI).contains(&z));
            }
            for a in [r.aod_az, r.aoa_az, r.phase] {
                assert!((-PI..=PI).contains(&a));
            }
        }
    }

    #[test]
    fn same_seed_same_clusters() {
        let p = ChannelProfile::defaults(Environment::UmaLos);
        let a = draw_clusters(&mut ChaCha8Rng::seed_from_u64(5), LinkKind::SR, &p, &geom()).unwrap();
        let b = draw_clusters(&mut ChaCha8Rng::seed_from_u64(5), LinkKind::SR, &p, &geom()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_ray_isotropic_siso_has_sqrt_power_magnitude() {
        let cs = ClusterSet {
            clusters: vec![Cluster {
                power: 1.0,
                delay: 0.0,
                doppler: 0.0,
                rays: vec![RayParams {
                    aod_az: 0.3,
                    aod_zen: 1.4,
                    aoa_az: -2.0,
                    aoa_zen: 1.7,
                    phase: 0.9,
                }],
            }],
            link_kind: LinkKind::SD,
        };
        let ant = Antenna::isotropic(ArrayGeometry::new(1, 1).unwrap());
        let h = assemble_channel(&cs, &ant, &ant, CoherenceWindow::new(0.0, 0.1)).unwrap();
        assert_relative_eq!(h.per_cluster_matrix[0][(0, 0)].norm(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn broadside_ray_gives_equal_phase_entries() {
        let g = ArrayGeometry::new(1, 2).unwrap();
        let ant = Antenna::new(g, ElementPattern::isotropic());
        let siso = Antenna::isotropic(ArrayGeometry::new(1, 1).unwrap());
        let cs = ClusterSet {
            clusters: vec![Cluster {
                power: 1.0,
                delay: 0.0,
                doppler: 0.0,
                rays: vec![RayParams {
                    aod_az: 0.0,
                    aod_zen: PI / 2.0,
                    aoa_az: 1.0,
                    aoa_zen: 1.0,
                    phase: 0.0,
                }],
            }],
            link_kind: LinkKind::SD,
        };
        let h = assemble_channel(&cs, &ant, &siso, CoherenceWindow::new(0.0, 1.0)).unwrap();
        let m = &h.per_cluster_matrix[0];
        assert_relative_eq!((m[(0, 0)] - m[(0, 1)]).norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn path_loss_examples() {
        let p = PathLossParams::UMA_LOS;
        assert_relative_eq!(path_loss_db(1.0, 1.0, &p, None).unwrap(), p.b, epsilon = 1e-12);
        // 22*2 + 28 + 20*log10(28) = 100.943 dB
        assert_relative_eq!(path_loss_db(100.0, 28.0, &p, None).unwrap(), 100.94, epsilon = 5e-3);
        let d1 = path_loss_db(37.0, 28.0, &p, None).unwrap();
        let d2 = path_loss_db(74.0, 28.0, &p, None).unwrap();
        assert_relative_eq!(d2 - d1, p.a * 2f64.log10(), epsilon = 1e-12);
        assert_relative_eq!(
            path_loss_db(100.0, 28.0, &p, Some(3.5)).unwrap(),
            path_loss_db(100.0, 28.0, &p, None).unwrap() + 3.5,
            epsilon = 1e-12
        );
        assert!(matches!(path_loss_db(0.0, 28.0, &p, None), Err(Error::Domain(_))));
        assert!(path_loss_db(-3.0, 28.0, &p, None).is_err());
    }

    #[test]
    fn expiry_boundary_is_inclusive() {
        let ant = Antenna::isotropic(ArrayGeometry::new(1, 1).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cs = draw_clusters(&mut rng, LinkKind::SD, &ChannelProfile::defaults(Environment::UmaNlos), &geom()).unwrap();
        let r = assemble_channel(&cs, &ant, &ant, CoherenceWindow::new(2.0, 0.1)).unwrap();
        assert!(!is_expired(&r, 2.0));
        assert!(is_expired(&r, r.coherence_until));
        assert!(!is_expired(&r, 2.05));
    }
}
