//! Scenario files, relay specifications and run configuration.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::antenna::{Antenna, ArrayGeometry, ElementPattern, Orientation};
use crate::channel::{ChannelProfile, Environment};
use crate::mac_phy::{L2smTable, McsTable, SlotClock, DEFAULT_STEEPNESS_DB};
use crate::math::Vec3;
use crate::relay::RelayKind;
use crate::scenario::{Node, NodeId, Obstacle, Role, Scenario};
use crate::traffic::{CbrSource, FlowQueue};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatternKind {
    Iso,
    Tr38901,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArraySpec {
    pub rows_v: usize,
    pub cols_h: usize,
    #[serde(default = "half")]
    pub spacing_wl: f64,
    #[serde(default = "iso")]
    pub pattern: PatternKind,
    /// Boresight `[azimuth, zenith]` in degrees.
    #[serde(default = "broadside")]
    pub orientation_deg: [f64; 2],
}

fn half() -> f64 {
    0.5
}

fn iso() -> PatternKind {
    PatternKind::Iso
}

fn broadside() -> [f64; 2] {
    [0.0, 90.0]
}

impl ArraySpec {
    pub fn antenna(&self) -> Result<Antenna> {
        let geom = ArrayGeometry::with_spacing(self.rows_v, self.cols_h, self.spacing_wl)?
            .oriented(Orientation::from_degrees(self.orientation_deg[0], self.orientation_deg[1]));
        let pattern = match self.pattern {
            PatternKind::Iso => ElementPattern::isotropic(),
            PatternKind::Tr38901 => ElementPattern::tr38901(),
        };
        Ok(Antenna::new(geom, pattern))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub id: NodeId,
    pub role: Role,
    pub pos: [f64; 3],
    pub array: ArraySpec,
    #[serde(default = "default_tx_power")]
    pub tx_power_dbm: f64,
}

fn default_tx_power() -> f64 {
    33.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleSpec {
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    #[serde(default = "default_building_loss")]
    pub loss_db: f64,
}

fn default_building_loss() -> f64 {
    40.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookSpec {
    pub n_in: usize,
    pub n_out: usize,
}

impl Default for CodebookSpec {
    fn default() -> Self {
        Self { n_in: 9, n_out: 9 }
    }
}

/// Relay selection for a run: a reflecting surface, an AF relay, or none
/// (gNB-only baseline).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelaySpec {
    /// `"irs"`, `"af"` or `"none"`.
    pub kind: String,
    #[serde(default)]
    pub rows_v: usize,
    #[serde(default)]
    pub cols_h: usize,
    #[serde(default)]
    pub amp_gain_db: f64,
    #[serde(default)]
    pub codebook: CodebookSpec,
}

impl RelaySpec {
    pub fn none() -> Self {
        Self {
            kind: "none".into(),
            rows_v: 0,
            cols_h: 0,
            amp_gain_db: 0.0,
            codebook: CodebookSpec::default(),
        }
    }

    /// Dimensions follow the `HxV` convention: horizontal columns first.
    pub fn irs(cols_h: usize, rows_v: usize) -> Self {
        Self {
            kind: "irs".into(),
            rows_v,
            cols_h,
            amp_gain_db: 0.0,
            codebook: CodebookSpec::default(),
        }
    }

    pub fn af(cols_h: usize, rows_v: usize, amp_gain_db: f64) -> Self {
        Self {
            kind: "af".into(),
            rows_v,
            cols_h,
            amp_gain_db,
            codebook: CodebookSpec::default(),
        }
    }

    /// `None` for the relay-free baseline.
    pub fn relay_kind(&self) -> Result<Option<RelayKind>> {
        match self.kind.to_ascii_lowercase().as_str() {
            "irs" => Ok(Some(RelayKind::Irs)),
            "af" => Ok(Some(RelayKind::Af)),
            "none" => Ok(None),
            other => Err(Error::config("relay.kind", format!("unknown relay kind `{other}`"))),
        }
    }

    pub fn n_elements(&self) -> usize {
        match self.relay_kind() {
            Ok(Some(_)) => self.rows_v * self.cols_h,
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.relay_kind()?;
        if kind.is_some() {
            if self.rows_v == 0 || self.cols_h == 0 {
                return Err(Error::config("relay.rows_v", "relay dimensions must be >= 1"));
            }
            if self.codebook.n_in == 0 || self.codebook.n_out == 0 {
                return Err(Error::config("relay.codebook", "n_in and n_out must be >= 1"));
            }
        }
        if kind == Some(RelayKind::Irs) && self.amp_gain_db != 0.0 {
            return Err(Error::config("relay.amp_gain_db", "a reflecting surface has no gain"));
        }
        if !(self.amp_gain_db >= 0.0) {
            return Err(Error::config("relay.amp_gain_db", "gain must be >= 0 dB"));
        }
        Ok(())
    }
}

impl fmt::Display for RelaySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.relay_kind() {
            Ok(Some(RelayKind::Irs)) => write!(f, "irs:{}x{}", self.cols_h, self.rows_v),
            Ok(Some(RelayKind::Af)) => write!(f, "af:{}x{}:{}", self.cols_h, self.rows_v, self.amp_gain_db),
            _ => write!(f, "none"),
        }
    }
}

impl FromStr for RelaySpec {
    type Err = Error;

    /// Parses `irs:HxV`, `af:HxV:gain_db` or `none`, where H counts
    /// horizontal columns and V vertical rows.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::config("relay", format!("cannot parse relay spec `{s}`"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let dims = |p: &str| -> Result<(usize, usize)> {
            let (h, v) = p.split_once(['x', 'X']).ok_or_else(bad)?;
            Ok((h.trim().parse().map_err(|_| bad())?, v.trim().parse().map_err(|_| bad())?))
        };
        let spec = match parts.as_slice() {
            ["none"] => RelaySpec::none(),
            ["irs", d] => {
                let (h, v) = dims(d)?;
                RelaySpec::irs(h, v)
            }
            ["af", d, g] => {
                let (h, v) = dims(d)?;
                RelaySpec::af(h, v, g.trim().parse().map_err(|_| bad())?)
            }
            _ => return Err(bad()),
        };
        spec.validate()?;
        Ok(spec)
    }
}

/// Statistical channel settings shared by every link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub n_clusters: usize,
    pub n_rays: usize,
    pub delay_spread_los_s: f64,
    pub delay_spread_nlos_s: f64,
    pub decay_db: f64,
    pub asd_deg: f64,
    pub zsd_deg: f64,
    pub cluster_az_spread_deg: f64,
    pub cluster_zen_spread_deg: f64,
    /// Ricean factor of LOS links; `null` removes the specular ray.
    pub k_factor_db: Option<f64>,
    pub coherence_s: f64,
    pub shadow_sigma_db: f64,
    pub ue_speed_mps: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        let los = ChannelProfile::defaults(Environment::UmaLos);
        let nlos = ChannelProfile::defaults(Environment::UmaNlos);
        Self {
            n_clusters: los.n_clusters,
            n_rays: los.n_rays,
            delay_spread_los_s: los.delay_spread_s,
            delay_spread_nlos_s: nlos.delay_spread_s,
            decay_db: los.decay_db,
            asd_deg: los.asd_deg,
            zsd_deg: los.zsd_deg,
            cluster_az_spread_deg: los.cluster_az_spread_deg,
            cluster_zen_spread_deg: los.cluster_zen_spread_deg,
            k_factor_db: los.k_factor_db,
            coherence_s: los.coherence_s,
            shadow_sigma_db: 0.0,
            ue_speed_mps: 0.0,
        }
    }
}

impl ChannelConfig {
    pub fn profile(&self, env: Environment) -> ChannelProfile {
        let los = env == Environment::UmaLos;
        ChannelProfile {
            n_clusters: self.n_clusters,
            n_rays: self.n_rays,
            delay_spread_s: if los { self.delay_spread_los_s } else { self.delay_spread_nlos_s },
            decay_db: self.decay_db,
            asd_deg: self.asd_deg,
            zsd_deg: self.zsd_deg,
            cluster_az_spread_deg: self.cluster_az_spread_deg,
            cluster_zen_spread_deg: self.cluster_zen_spread_deg,
            k_factor_db: if los { self.k_factor_db } else { None },
            coherence_s: self.coherence_s,
            shadow_sigma_db: self.shadow_sigma_db,
            ue_speed_mps: self.ue_speed_mps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.profile(Environment::UmaLos).validate()?;
        self.profile(Environment::UmaNlos).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub rate_bps: f64,
    pub packet_bytes: u64,
    pub queue_bytes: u64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        let src = CbrSource::default();
        Self {
            rate_bps: src.rate_bps,
            packet_bytes: src.packet_bytes,
            queue_bytes: FlowQueue::DEFAULT_CAPACITY,
        }
    }
}

impl TrafficConfig {
    pub fn source(&self) -> CbrSource {
        CbrSource {
            rate_bps: self.rate_bps,
            packet_bytes: self.packet_bytes,
        }
    }
}

/// Receiver, numerology and link-abstraction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhyConfig {
    pub ue_noise_figure_db: f64,
    pub relay_noise_figure_db: f64,
    pub n_subbands: usize,
    pub slot_s: f64,
    pub overhead_frac: f64,
    pub max_retx: u32,
    pub bler_steepness_db: f64,
}

impl Default for PhyConfig {
    fn default() -> Self {
        Self {
            ue_noise_figure_db: 9.0,
            relay_noise_figure_db: 5.0,
            n_subbands: 50,
            slot_s: SlotClock::DEFAULT_SLOT_NS as f64 * 1e-9,
            overhead_frac: 0.2,
            max_retx: 3,
            bler_steepness_db: DEFAULT_STEEPNESS_DB,
        }
    }
}

impl PhyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_subbands == 0 {
            return Err(Error::config("phy.n_subbands", "must be >= 1"));
        }
        if !(self.slot_s > 0.0) {
            return Err(Error::config("phy.slot_s", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.overhead_frac) {
            return Err(Error::config("phy.overhead_frac", "must lie in [0, 1)"));
        }
        if !(self.bler_steepness_db > 0.0) {
            return Err(Error::config("phy.bler_steepness_db", "must be > 0"));
        }
        Ok(())
    }
}

/// On-disk scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub name: String,
    /// Free-form annotations, carried into run metadata.
    #[serde(default)]
    pub meta: serde_json::Value,
    #[serde(default = "default_carrier")]
    pub carrier_hz: f64,
    #[serde(default = "default_bandwidth")]
    pub bandwidth_hz: f64,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default = "RelaySpec::none")]
    pub relay: RelaySpec,
    #[serde(default)]
    pub traffic: TrafficConfig,
    #[serde(default)]
    pub phy: PhyConfig,
}

fn default_carrier() -> f64 {
    28e9
}

fn default_bandwidth() -> f64 {
    100e6
}

impl ScenarioFile {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Builds the validated geometry. The relay node takes its element count
    /// from `relay` and is left out entirely for the baseline.
    pub fn scenario(&self, relay: &RelaySpec) -> Result<Scenario> {
        let relay_kind = relay.relay_kind()?;
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let mut array = n.array.clone();
            if n.role == Role::Relay {
                if relay_kind.is_none() {
                    continue;
                }
                array.rows_v = relay.rows_v;
                array.cols_h = relay.cols_h;
            }
            nodes.push(Node {
                id: n.id,
                role: n.role,
                position: Vec3::from(n.pos),
                antenna: array.antenna().map_err(|e| match e {
                    Error::Config { msg, .. } => Error::config(format!("nodes[{}].array", n.id), msg),
                    other => other,
                })?,
                tx_power_dbm: n.tx_power_dbm,
            });
        }
        if relay_kind.is_some() && !nodes.iter().any(|n| n.role == Role::Relay) {
            return Err(Error::config("nodes", "a relay was requested but the scenario has no RELAY node"));
        }
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| Obstacle::new(o.box_min.into(), o.box_max.into(), o.loss_db))
            .collect::<Result<_>>()?;
        let s = Scenario {
            name: self.name.clone(),
            nodes,
            obstacles,
            carrier_hz: self.carrier_hz,
            bandwidth_hz: self.bandwidth_hz,
        };
        s.validate()?;
        Ok(s)
    }
}

/// Everything a run needs, resolved and validated.
#[derive(Debug, Clone)]
pub struct SimSetup {
    pub file: ScenarioFile,
    pub scenario: Scenario,
    pub relay: RelaySpec,
    pub channel: ChannelConfig,
    pub traffic: TrafficConfig,
    pub phy: PhyConfig,
    pub mcs: McsTable,
    pub l2sm: L2smTable,
}

impl SimSetup {
    /// Resolves a scenario file with an optional relay override and the
    /// default MCS/L2SM tables.
    pub fn new(file: ScenarioFile, relay: Option<RelaySpec>) -> Result<Self> {
        let relay = relay.unwrap_or_else(|| file.relay.clone());
        relay.validate()?;
        let scenario = file.scenario(&relay)?;
        file.channel.validate()?;
        file.traffic.source().validate()?;
        file.phy.validate()?;
        let mcs = McsTable::default();
        let l2sm = L2smTable::logistic(&mcs, file.phy.bler_steepness_db);
        Ok(Self {
            channel: file.channel.clone(),
            traffic: file.traffic.clone(),
            phy: file.phy.clone(),
            scenario,
            relay,
            mcs,
            l2sm,
            file,
        })
    }

    pub fn from_path(path: &Path, relay: Option<RelaySpec>) -> Result<Self> {
        Self::new(ScenarioFile::from_path(path)?, relay)
    }

    /// Replaces the MCS table; the L2SM curves follow unless overridden too.
    pub fn with_tables(mut self, mcs: Option<McsTable>, l2sm: Option<L2smTable>) -> Result<Self> {
        if let Some(m) = mcs {
            m.validate()?;
            self.l2sm = L2smTable::logistic(&m, self.phy.bler_steepness_db);
            self.mcs = m;
        }
        if let Some(l) = l2sm {
            l.validate()?;
            self.l2sm = l;
        }
        for e in &self.mcs.entries {
            if self.l2sm.curve(e.index).is_none() {
                return Err(Error::config("l2sm", format!("no BLER curve for MCS {}", e.index)));
            }
        }
        Ok(self)
    }
}

/// Parameters of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub scenario_path: PathBuf,
    pub relay_override: Option<RelaySpec>,
    pub duration_s: f64,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub trace_packets: bool,
    pub traffic_override: Option<TrafficConfig>,
    pub channel_override: Option<ChannelConfig>,
    pub mcs_path: Option<PathBuf>,
    pub l2sm_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(scenario_path: impl Into<PathBuf>) -> Self {
        Self {
            scenario_path: scenario_path.into(),
            relay_override: None,
            duration_s: 2.0,
            seed: 42,
            out_dir: None,
            trace_packets: false,
            traffic_override: None,
            channel_override: None,
            mcs_path: None,
            l2sm_path: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::config("duration_s", "duration must be > 0"));
        }
        Ok(())
    }

    /// Loads the scenario and applies every override.
    pub fn setup(&self) -> Result<SimSetup> {
        self.validate()?;
        let mut file = ScenarioFile::from_path(&self.scenario_path)?;
        if let Some(t) = &self.traffic_override {
            file.traffic = t.clone();
        }
        if let Some(c) = &self.channel_override {
            file.channel = c.clone();
        }
        let mcs = self.mcs_path.as_deref().map(McsTable::from_csv).transpose()?;
        let l2sm = self.l2sm_path.as_deref().map(L2smTable::from_csv).transpose()?;
        SimSetup::new(file, self.relay_override.clone())?.with_tables(mcs, l2sm)
    }
}
