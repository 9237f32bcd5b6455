//! Binds scenario geometry to the link engine: draws the channels of every
//! link for one coherence interval, sweeps beams and relay configurations,
//! and produces per-UE SINR reports.

use std::collections::BTreeMap;

use rand_distr::{Distribution, Normal};

use crate::antenna::{default_codebook, Codebook};
use crate::channel::{
    assemble_channel, draw_clusters, path_loss_db, ChannelRealization, CoherenceWindow, Environment, LinkGeometry,
    LinkKind, PathLossParams,
};
use crate::link_engine::{
    direct_psd, relayed_psd, sinr_per_subband, sweep_direct, sweep_long_term, CascadeBudget, Psd, SinrReport,
    SubbandGrid, SweepResult,
};
use crate::math::CMatrix;
use crate::relay::{relay_codebook_toward, relayed_noise_from_row, RelayConfigMatrix, RelayKind, RelayNoise};
use crate::rng::stream;
use crate::scenario::{blockage_loss_db, distance_3d, los_state, Node, NodeId};
use crate::sim::config::{ChannelConfig, SimSetup};
use crate::{db_to_lin, dbm_to_w, Result};

/// Static description of one hop.
#[derive(Debug, Clone)]
pub struct Hop {
    pub kind: LinkKind,
    pub code: u64,
    pub distance_m: f64,
    pub env: Environment,
    pub path_loss_db: f64,
    pub blockage_db: f64,
    pub geometry: LinkGeometry,
}

impl Hop {
    fn new(setup: &SimSetup, kind: LinkKind, code: u64, tx: &Node, rx: &Node) -> Result<Self> {
        let state = los_state(&setup.scenario, tx, rx);
        let env = if state.is_los() {
            Environment::UmaLos
        } else {
            Environment::UmaNlos
        };
        let distance_m = distance_3d(tx, rx);
        let fc_ghz = setup.scenario.carrier_hz / 1e9;
        Ok(Self {
            kind,
            code,
            distance_m,
            env,
            path_loss_db: path_loss_db(distance_m, fc_ghz, &PathLossParams::for_env(env), None)?,
            blockage_db: blockage_loss_db(&state),
            geometry: LinkGeometry::between(tx.position, rx.position, setup.scenario.carrier_hz),
        })
    }

    /// Draws the hop's channel for `interval`; returns it with the total
    /// loss (path loss, blockage and shadowing) in dB.
    fn draw(
        &self,
        channel: &ChannelConfig,
        tx: &Node,
        rx: &Node,
        seed: u64,
        interval: u64,
        t0: f64,
    ) -> Result<(ChannelRealization, f64)> {
        let profile = channel.profile(self.env);
        let mut rng = stream(seed, "channel", &[self.code, interval]);
        let clusters = draw_clusters(&mut rng, self.kind, &profile, &self.geometry)?;
        let shadow = if profile.shadow_sigma_db > 0.0 {
            Normal::new(0.0, profile.shadow_sigma_db)
                .expect("finite sigma")
                .sample(&mut rng)
        } else {
            0.0
        };
        let h = assemble_channel(
            &clusters,
            &tx.antenna,
            &rx.antenna,
            CoherenceWindow::new(t0, profile.coherence_s),
        )?;
        Ok((h, self.path_loss_db + self.blockage_db + shadow))
    }
}

#[derive(Debug, Clone)]
struct UeSetup {
    node: Node,
    codebook: Codebook,
    /// Relay-destination hop, or the direct hop without a relay.
    hop: Hop,
    relay_codebook: Vec<RelayConfigMatrix>,
}

#[derive(Debug, Clone)]
struct RelaySetup {
    node: Node,
    kind: RelayKind,
    sr: Hop,
    noise: RelayNoise,
}

/// Per-UE link state frozen for one coherence interval.
#[derive(Debug, Clone)]
pub struct UeLinkState {
    pub sweep: SweepResult,
    pub loss_db: f64,
    /// Relay noise reaching the UE, W.
    pub af_noise_w: f64,
    /// SINR at the start of the interval.
    pub report: SinrReport,
    h: ChannelRealization,
    time_varying: bool,
}

#[derive(Debug, Clone)]
pub struct IntervalLinks {
    pub interval: u64,
    pub t0: f64,
    sr: Option<ChannelRealization>,
    pub per_ue: BTreeMap<NodeId, UeLinkState>,
}

/// Link-level model of a scenario.
#[derive(Debug, Clone)]
pub struct LinkModel {
    pub grid: SubbandGrid,
    tx_psd: Psd,
    noise_psd: Psd,
    noise_w: f64,
    tx_power_w: f64,
    gnb: Node,
    gnb_codebook: Codebook,
    ues: Vec<UeSetup>,
    relay: Option<RelaySetup>,
    channel: ChannelConfig,
    beta: f64,
}

const SR_CODE: u64 = 0;
const RD_BASE: u64 = 1_000_000;
const SD_BASE: u64 = 2_000_000;

impl LinkModel {
    pub fn new(setup: &SimSetup) -> Result<Self> {
        let sc = &setup.scenario;
        let grid = SubbandGrid::new(setup.phy.n_subbands, sc.bandwidth_hz)?;
        let gnb = sc.gnb().clone();
        let tx_power_w = dbm_to_w(gnb.tx_power_dbm);
        let noise_psd = Psd::thermal(&grid, setup.phy.ue_noise_figure_db);
        let relay_kind = setup.relay.relay_kind()?;
        let relay = match (relay_kind, sc.relay()) {
            (Some(kind), Some(r)) => Some(RelaySetup {
                node: r.clone(),
                kind,
                sr: Hop::new(setup, LinkKind::SR, SR_CODE, &gnb, r)?,
                noise: RelayNoise::thermal(sc.bandwidth_hz, setup.phy.relay_noise_figure_db),
            }),
            _ => None,
        };
        let mut ues = Vec::new();
        for ue in sc.ues() {
            let (hop, relay_codebook) = match &relay {
                Some(r) => {
                    let hop = Hop::new(setup, LinkKind::RD, RD_BASE + u64::from(ue.id), &r.node, ue)?;
                    let cb = relay_codebook_toward(
                        r.kind,
                        setup.relay.amp_gain_db,
                        &r.node.antenna.geometry,
                        Some(r.sr.geometry.los_aoa),
                        Some(hop.geometry.los_aod),
                        setup.relay.codebook.n_in,
                        setup.relay.codebook.n_out,
                    )?;
                    (hop, cb)
                }
                None => (
                    Hop::new(setup, LinkKind::SD, SD_BASE + u64::from(ue.id), &gnb, ue)?,
                    Vec::new(),
                ),
            };
            ues.push(UeSetup {
                codebook: default_codebook(&ue.antenna.geometry)?,
                node: ue.clone(),
                hop,
                relay_codebook,
            });
        }
        Ok(Self {
            tx_psd: Psd::flat(&grid, tx_power_w),
            noise_w: noise_psd.total_power(),
            noise_psd,
            tx_power_w,
            gnb_codebook: default_codebook(&gnb.antenna.geometry)?,
            gnb,
            ues,
            relay,
            channel: setup.channel.clone(),
            beta: setup.mcs.entries[0].beta,
            grid,
        })
    }

    pub fn ue_ids(&self) -> Vec<NodeId> {
        self.ues.iter().map(|u| u.node.id).collect()
    }

    pub fn coherence_s(&self) -> f64 {
        self.channel.coherence_s
    }

    /// Path loss plus blockage of every hop, for run metadata.
    pub fn hop_losses(&self) -> Vec<(String, f64, f64)> {
        let mut out = Vec::new();
        if let Some(r) = &self.relay {
            out.push(("SR".into(), r.sr.distance_m, r.sr.path_loss_db + r.sr.blockage_db));
        }
        for u in &self.ues {
            out.push((
                format!("{:?}-{}", u.hop.kind, u.node.id),
                u.hop.distance_m,
                u.hop.path_loss_db + u.hop.blockage_db,
            ));
        }
        out
    }

    /// Draws all channels of `interval`, sweeps every UE and evaluates its
    /// SINR at `t0`.
    pub fn draw(&self, seed: u64, interval: u64, t0: f64) -> Result<IntervalLinks> {
        let mut per_ue = BTreeMap::new();
        let sr = match &self.relay {
            Some(r) => Some(r.sr.draw(&self.channel, &self.gnb, &r.node, seed, interval, t0)?),
            None => None,
        };
        let sr_long: Option<CMatrix> = sr.as_ref().map(|(h, _)| h.long_term());
        for ue in &self.ues {
            let state = match (&self.relay, &sr, &sr_long) {
                (Some(r), Some((h_sr, loss_sr)), Some(sr_long)) => {
                    let (h_rd, loss_rd) = ue.hop.draw(&self.channel, &r.node, &ue.node, seed, interval, t0)?;
                    let rd_long = h_rd.long_term();
                    let budget = CascadeBudget {
                        tx_power_w: self.tx_power_w,
                        gain_sr: db_to_lin(-loss_sr),
                        gain_rd: db_to_lin(-loss_rd),
                        noise_w: self.noise_w,
                    };
                    let sweep = sweep_long_term(
                        &self.gnb_codebook,
                        &ue.codebook,
                        &ue.relay_codebook,
                        sr_long,
                        &rd_long,
                        &budget,
                        &r.noise,
                    )?;
                    let w_d = &ue.codebook.codewords[sweep.w_d_idx];
                    let phi = &ue.relay_codebook[sweep.phi_idx];
                    let row = rd_long.vec_mul(&w_d.weights)?;
                    let af_noise_w = budget.gain_rd * relayed_noise_from_row(&row, phi, &r.noise);
                    let mut st = UeLinkState {
                        sweep,
                        loss_db: loss_sr + loss_rd,
                        af_noise_w,
                        report: SinrReport::silent(self.grid.n_subbands, t0),
                        time_varying: h_sr.dopplers.iter().chain(&h_rd.dopplers).any(|&v| v != 0.0),
                        h: h_rd,
                    };
                    st.report = self.evaluate(ue, &st, Some(h_sr), t0)?;
                    st
                }
                _ => {
                    let (h_sd, loss) = ue.hop.draw(&self.channel, &self.gnb, &ue.node, seed, interval, t0)?;
                    let sweep = sweep_direct(
                        &self.gnb_codebook,
                        &ue.codebook,
                        &h_sd,
                        self.tx_power_w,
                        db_to_lin(-loss),
                        self.noise_w,
                    )?;
                    let mut st = UeLinkState {
                        sweep,
                        loss_db: loss,
                        af_noise_w: 0.0,
                        report: SinrReport::silent(self.grid.n_subbands, t0),
                        time_varying: h_sd.dopplers.iter().any(|&v| v != 0.0),
                        h: h_sd,
                    };
                    st.report = self.evaluate(ue, &st, None, t0)?;
                    st
                }
            };
            per_ue.insert(ue.node.id, state);
        }
        Ok(IntervalLinks {
            interval,
            t0,
            sr: sr.map(|(h, _)| h),
            per_ue,
        })
    }

    fn evaluate(&self, ue: &UeSetup, st: &UeLinkState, h_sr: Option<&ChannelRealization>, t: f64) -> Result<SinrReport> {
        let w_s = &self.gnb_codebook.codewords[st.sweep.w_s_idx];
        let w_d = &ue.codebook.codewords[st.sweep.w_d_idx];
        let rx = match h_sr {
            Some(h_sr) => {
                let phi = &ue.relay_codebook[st.sweep.phi_idx];
                relayed_psd(w_s, w_d, phi, h_sr, &st.h, t, &self.grid, &self.tx_psd, st.loss_db)?
            }
            None => direct_psd(w_s, w_d, &st.h, t, &self.grid, &self.tx_psd, st.loss_db, 0.0)?,
        };
        let per_subband = sinr_per_subband(&rx, &[], &self.noise_psd, st.af_noise_w)?;
        if per_subband.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Ok(SinrReport::silent(self.grid.n_subbands, t));
        }
        SinrReport::new(per_subband, self.beta, t)
    }

    /// SINR report of `ue` at time `t` within the interval of `links`.
    pub fn report(&self, links: &IntervalLinks, ue: NodeId, t: f64) -> Result<SinrReport> {
        let st = &links.per_ue[&ue];
        if !st.time_varying || t == links.t0 {
            let mut r = st.report.clone();
            r.timestamp = t;
            return Ok(r);
        }
        let setup = self.ues.iter().find(|u| u.node.id == ue).expect("known UE");
        self.evaluate(setup, st, links.sr.as_ref(), t)
    }
}
