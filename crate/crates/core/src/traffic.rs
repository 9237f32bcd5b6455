//! Constant-bit-rate sources, per-UE drop-tail queues with byte-level
//! segmentation, and KPI aggregation (throughput, latency, PER, SINR trace).

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::link_engine::SinrReport;
use crate::scenario::NodeId;
use crate::{Error, Result};

pub type PacketId = u64;

/// Converts integer nanoseconds to seconds.
pub fn ns_to_s(t: u64) -> f64 {
    t as f64 * 1e-9
}

/// Converts seconds to integer nanoseconds, rounding to nearest.
pub fn s_to_ns(t: f64) -> u64 {
    (t * 1e9).round().max(0.0) as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PacketStatus {
    Queued,
    InFlight,
    Delivered,
    Lost,
}

impl PacketStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketStatus::Queued => "QUEUED",
            PacketStatus::InFlight => "IN_FLIGHT",
            PacketStatus::Delivered => "DELIVERED",
            PacketStatus::Lost => "LOST",
        }
    }

    fn rank(self) -> u8 {
        match self {
            PacketStatus::Queued => 0,
            PacketStatus::InFlight => 1,
            PacketStatus::Delivered | PacketStatus::Lost => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub id: PacketId,
    pub ue: NodeId,
    pub bytes: u64,
    pub t_gen: f64,
    pub t_rx: Option<f64>,
    pub status: PacketStatus,
    /// Highest transmission attempt any of its bytes went through.
    pub attempts: u32,
}

impl Packet {
    pub fn new(id: PacketId, ue: NodeId, bytes: u64, t_gen: f64) -> Self {
        Self {
            id,
            ue,
            bytes,
            t_gen,
            t_rx: None,
            status: PacketStatus::Queued,
            attempts: 0,
        }
    }

    /// Moves the status forward; terminal states are never left.
    pub fn advance(&mut self, to: PacketStatus) -> bool {
        if to.rank() > self.status.rank() {
            self.status = to;
            true
        } else {
            false
        }
    }

    pub fn latency(&self) -> Option<f64> {
        match (self.status, self.t_rx) {
            (PacketStatus::Delivered, Some(rx)) => Some(rx - self.t_gen),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CbrSource {
    pub rate_bps: f64,
    pub packet_bytes: u64,
}

impl Default for CbrSource {
    fn default() -> Self {
        Self {
            rate_bps: 50e6,
            packet_bytes: 1500,
        }
    }
}

impl CbrSource {
    pub fn validate(&self) -> Result<()> {
        if !(self.rate_bps > 0.0 && self.rate_bps.is_finite()) {
            return Err(Error::config("traffic.rate_bps", "rate must be > 0"));
        }
        if self.packet_bytes == 0 {
            return Err(Error::config("traffic.packet_bytes", "packet size must be > 0"));
        }
        Ok(())
    }

    /// Inter-arrival time in seconds.
    pub fn interval_s(&self) -> f64 {
        self.packet_bytes as f64 * 8.0 / self.rate_bps
    }

    pub fn interval_ns(&self) -> u64 {
        s_to_ns(self.interval_s()).max(1)
    }
}

/// Arrivals at `t0 + k * interval`, `k >= 1`, strictly before `t1`. Ids
/// start at `first_id`.
pub fn generate_arrivals(src: &CbrSource, ue: NodeId, t0: f64, t1: f64, first_id: PacketId) -> Vec<Packet> {
    let (a, b, step) = (s_to_ns(t0), s_to_ns(t1), src.interval_ns());
    let mut out = Vec::new();
    let mut t = a + step;
    while t < b {
        out.push(Packet::new(first_id + out.len() as u64, ue, src.packet_bytes, ns_to_s(t)));
        t += step;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueResult {
    Accepted,
    DroppedOverflow,
}

/// Part of a packet carried by one transport block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub packet: PacketId,
    pub bytes: u64,
    /// The segment carries the packet's last byte.
    pub completes: bool,
}

/// FIFO of packet bytes awaiting transmission.
#[derive(Debug, Clone)]
pub struct FlowQueue {
    entries: VecDeque<(PacketId, u64)>,
    capacity_bytes: u64,
    occupancy: u64,
}

impl FlowQueue {
    pub const DEFAULT_CAPACITY: u64 = 5_000_000;

    pub fn new(capacity_bytes: u64) -> Self {
        Self {
            entries: VecDeque::new(),
            capacity_bytes,
            occupancy: 0,
        }
    }

    pub fn occupancy(&self) -> u64 {
        self.occupancy
    }

    pub fn capacity(&self) -> u64 {
        self.capacity_bytes
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn packet_ids(&self) -> impl Iterator<Item = PacketId> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Pops up to `n` bytes from the head, splitting packets as needed.
    pub fn take_bytes(&mut self, n: u64) -> Vec<Segment> {
        let mut left = n;
        let mut out = Vec::new();
        while left > 0 {
            let Some(head) = self.entries.front_mut() else { break };
            let take = head.1.min(left);
            head.1 -= take;
            left -= take;
            self.occupancy -= take;
            let completes = head.1 == 0;
            out.push(Segment {
                packet: head.0,
                bytes: take,
                completes,
            });
            if completes {
                self.entries.pop_front();
            }
        }
        out
    }

    /// Discards the untransmitted remainder of `id` if it sits at the head.
    pub fn discard_head(&mut self, id: PacketId) -> bool {
        match self.entries.front() {
            Some(&(head, rem)) if head == id => {
                self.occupancy -= rem;
                self.entries.pop_front();
                true
            }
            _ => false,
        }
    }
}

/// Drop-tail admission.
pub fn enqueue(q: &mut FlowQueue, p: &Packet) -> EnqueueResult {
    if q.occupancy + p.bytes > q.capacity_bytes {
        return EnqueueResult::DroppedOverflow;
    }
    q.entries.push_back((p.id, p.bytes));
    q.occupancy += p.bytes;
    EnqueueResult::Accepted
}

/// Delivered bits per second, per UE.
pub fn throughput_bps(delivered: &[Packet], sim_duration: f64) -> Result<BTreeMap<NodeId, f64>> {
    if !(sim_duration > 0.0) {
        return Err(Error::Domain("duration must be > 0".into()));
    }
    let mut out = BTreeMap::new();
    for p in delivered.iter().filter(|p| p.status == PacketStatus::Delivered) {
        *out.entry(p.ue).or_insert(0.0) += p.bytes as f64 * 8.0;
    }
    for v in out.values_mut() {
        *v /= sim_duration;
    }
    Ok(out)
}

/// Nearest-rank percentile (`ceil(p n)`-th smallest); `None` on empty input.
pub fn percentile_nearest_rank(values: &[f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
    Some(v[rank - 1])
}

/// 95th-percentile latency per UE over delivered packets; UEs without
/// deliveries are absent.
pub fn latency_p95_s(delivered: &[Packet]) -> BTreeMap<NodeId, f64> {
    let mut by_ue: BTreeMap<NodeId, Vec<f64>> = BTreeMap::new();
    for p in delivered {
        if let Some(l) = p.latency() {
            by_ue.entry(p.ue).or_default().push(l);
        }
    }
    by_ue
        .into_iter()
        .filter_map(|(ue, v)| percentile_nearest_rank(&v, 0.95).map(|x| (ue, x)))
        .collect()
}

/// `lost / (delivered + lost)`; `None` when nothing was accounted.
pub fn per(delivered: u64, lost: u64) -> Option<f64> {
    let total = delivered + lost;
    (total > 0).then(|| lost as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_s: f64,
    pub ue: NodeId,
    pub eff_sinr_db: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SinrTrace {
    pub rows: Vec<TraceRow>,
}

impl SinrTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn values_for(&self, ue: NodeId) -> Vec<f64> {
        self.rows.iter().filter(|r| r.ue == ue).map(|r| r.eff_sinr_db).collect()
    }
}

pub fn sinr_trace_append(trace: &mut SinrTrace, report: &SinrReport, ue: NodeId) {
    trace.rows.push(TraceRow {
        t_s: report.timestamp,
        ue,
        eff_sinr_db: report.effective_db,
    });
}

/// Empirical CDF of `values` evaluated at `x`.
pub fn ecdf(values: &[f64], x: f64) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().filter(|&&v| v <= x).count() as f64 / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeMetrics {
    pub throughput_bps: f64,
    pub latency_p95_s: Option<f64>,
    pub latency_mean_s: Option<f64>,
    pub per: Option<f64>,
    /// Mean of the finite effective-SINR trace values, in dB.
    pub sinr_mean_db: Option<f64>,
    pub generated: u64,
    pub delivered: u64,
    pub lost: u64,
    /// Packets still queued or in flight when the run ended.
    pub pending: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub per_ue: BTreeMap<NodeId, UeMetrics>,
    pub duration_s: f64,
}

impl MetricsSummary {
    /// Mean of a per-UE quantity over the UEs where it is present.
    pub fn mean_over_ues(&self, f: impl Fn(&UeMetrics) -> Option<f64>) -> Option<f64> {
        let v: Vec<f64> = self.per_ue.values().filter_map(f).collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// Aggregates per-UE KPIs from the final packet records and the SINR trace.
pub fn summarize(packets: &[Packet], ues: &[NodeId], trace: &SinrTrace, duration_s: f64) -> Result<MetricsSummary> {
    let thr = throughput_bps(packets, duration_s)?;
    let p95 = latency_p95_s(packets);
    let mut per_ue = BTreeMap::new();
    for &ue in ues {
        let mine: Vec<&Packet> = packets.iter().filter(|p| p.ue == ue).collect();
        let count = |s: PacketStatus| mine.iter().filter(|p| p.status == s).count() as u64;
        let (delivered, lost) = (count(PacketStatus::Delivered), count(PacketStatus::Lost));
        let lat: Vec<f64> = mine.iter().filter_map(|p| p.latency()).collect();
        let sinr: Vec<f64> = trace.values_for(ue).into_iter().filter(|v| v.is_finite()).collect();
        per_ue.insert(
            ue,
            UeMetrics {
                throughput_bps: thr.get(&ue).copied().unwrap_or(0.0),
                latency_p95_s: p95.get(&ue).copied(),
                latency_mean_s: (!lat.is_empty()).then(|| lat.iter().sum::<f64>() / lat.len() as f64),
                per: per(delivered, lost),
                sinr_mean_db: (!sinr.is_empty()).then(|| sinr.iter().sum::<f64>() / sinr.len() as f64),
                generated: mine.len() as u64,
                delivered,
                lost,
                pending: mine.len() as u64 - delivered - lost,
            },
        );
    }
    Ok(MetricsSummary { per_ue, duration_s })
}
