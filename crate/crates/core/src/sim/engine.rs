//! Discrete-event simulation loop: CBR arrivals, TDMA slot ticks and
//! channel-coherence expiries, with integer-nanosecond timestamps.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::link_engine::{effective_sinr, SinrReport};
use crate::mac_phy::{arq_on_failure, tb_error, tb_size_bytes, ArqOutcome, McsEntry, RoundRobin, SlotClock, TransportBlock};
use crate::rng::{stream, SimRng};
use crate::scenario::NodeId;
use crate::sim::config::SimSetup;
use crate::sim::link::{IntervalLinks, LinkModel};
use crate::traffic::{
    enqueue, ns_to_s, s_to_ns, sinr_trace_append, summarize, EnqueueResult, FlowQueue, MetricsSummary, Packet,
    PacketStatus, Segment, SinrTrace,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EventKind {
    ChannelExpiry { interval: u64 },
    SlotTick { slot: u64 },
    Arrival { ue: NodeId },
    End,
}

/// Scheduled event; ordered by time, then insertion sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Event {
    pub time_ns: u64,
    pub seq: u64,
    pub kind: EventKind,
}

/// Time-ordered event queue with FIFO tie-breaking.
#[derive(Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Reverse<Event>>,
    next_seq: u64,
    now_ns: u64,
}

impl EventQueue {
    pub fn now_ns(&self) -> u64 {
        self.now_ns
    }

    pub fn schedule(&mut self, time_ns: u64, kind: EventKind) -> Result<()> {
        if time_ns < self.now_ns {
            return Err(Error::Invariant(format!(
                "event {kind:?} scheduled at {time_ns} ns, before now ({} ns)",
                self.now_ns
            )));
        }
        self.heap.push(Reverse(Event {
            time_ns,
            seq: self.next_seq,
            kind,
        }));
        self.next_seq += 1;
        Ok(())
    }

    pub fn pop(&mut self) -> Option<Event> {
        let Reverse(ev) = self.heap.pop()?;
        debug_assert!(ev.time_ns >= self.now_ns);
        self.now_ns = ev.time_ns;
        Some(ev)
    }
}

#[derive(Debug, Clone)]
struct InFlight {
    tb: TransportBlock,
    segments: Vec<Segment>,
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: MetricsSummary,
    pub trace: SinrTrace,
    pub packets: Vec<Packet>,
    /// Counts of transport blocks by outcome.
    pub tb_stats: TbStats,
    pub ues: Vec<NodeId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize)]
pub struct TbStats {
    pub created: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub in_flight_at_end: u64,
    pub retransmissions: u64,
    pub idle_slots: u64,
    pub silent_slots: u64,
}

/// Picks the highest MCS whose threshold is met by the effective SINR
/// computed with that MCS's own EESM beta.
fn select_for_report<'a>(setup: &'a SimSetup, report: &SinrReport) -> Result<Option<(&'a McsEntry, f64)>> {
    if report.effective_db == f64::NEG_INFINITY {
        return Ok(None);
    }
    for e in setup.mcs.entries.iter().rev() {
        let eff = effective_sinr(&report.per_subband_db, e.beta)?;
        if e.min_sinr_db <= eff {
            return Ok(Some((e, eff)));
        }
    }
    Ok(None)
}

struct Engine<'a> {
    setup: &'a SimSetup,
    model: &'a LinkModel,
    seed: u64,
    end_ns: u64,
    clock: SlotClock,
    coherence_ns: u64,
    events: EventQueue,
    packets: Vec<Packet>,
    queues: BTreeMap<NodeId, FlowQueue>,
    pending: BTreeMap<NodeId, InFlight>,
    scheduler: RoundRobin,
    links: Option<IntervalLinks>,
    trace: SinrTrace,
    l2sm_rng: SimRng,
    stats: TbStats,
}

impl Engine<'_> {
    fn on_expiry(&mut self, interval: u64) -> Result<()> {
        let t = self.events.now_ns();
        let links = self.model.draw(self.seed, interval, ns_to_s(t))?;
        for (&ue, st) in &links.per_ue {
            sinr_trace_append(&mut self.trace, &st.report, ue);
        }
        self.links = Some(links);
        let next = t + self.coherence_ns;
        if next < self.end_ns {
            self.events.schedule(next, EventKind::ChannelExpiry { interval: interval + 1 })?;
        }
        Ok(())
    }

    fn on_arrival(&mut self, ue: NodeId) -> Result<()> {
        let t = self.events.now_ns();
        let src = self.setup.traffic.source();
        let mut p = Packet::new(self.packets.len() as u64, ue, src.packet_bytes, ns_to_s(t));
        let q = self.queues.get_mut(&ue).expect("queue per UE");
        if enqueue(q, &p) == EnqueueResult::DroppedOverflow {
            p.advance(PacketStatus::Lost);
        }
        self.packets.push(p);
        let next = t + src.interval_ns();
        if next < self.end_ns {
            self.events.schedule(next, EventKind::Arrival { ue })?;
        }
        Ok(())
    }

    fn on_slot(&mut self, slot: u64) -> Result<()> {
        let t = self.events.now_ns();
        self.clock.slots_elapsed = slot + 1;
        let backlogged: Vec<NodeId> = self
            .queues
            .iter()
            .filter(|(ue, q)| !q.is_empty() || self.pending.contains_key(ue))
            .map(|(&ue, _)| ue)
            .collect();
        match self.scheduler.schedule(&backlogged, slot) {
            Some(ue) => self.serve(ue, slot, t)?,
            None => self.stats.idle_slots += 1,
        }
        let next = t + self.clock.slot_ns;
        if next < self.end_ns {
            self.events.schedule(next, EventKind::SlotTick { slot: slot + 1 })?;
        }
        Ok(())
    }

    fn serve(&mut self, ue: NodeId, slot: u64, t: u64) -> Result<()> {
        let links = self.links.as_ref().ok_or_else(|| Error::Invariant("slot before first channel draw".into()))?;
        let report = self.model.report(links, ue, ns_to_s(t))?;
        let flight = match self.pending.remove(&ue) {
            Some(f) => {
                self.stats.retransmissions += 1;
                f
            }
            None => {
                let Some((mcs, _)) = select_for_report(self.setup, &report)? else {
                    self.stats.silent_slots += 1;
                    return Ok(());
                };
                let bytes = tb_size_bytes(mcs, self.setup.scenario.bandwidth_hz, &self.clock, self.setup.phy.overhead_frac)?;
                let segments = self.queues.get_mut(&ue).expect("queue per UE").take_bytes(bytes);
                for s in &segments {
                    self.packets[s.packet as usize].advance(PacketStatus::InFlight);
                }
                self.stats.created += 1;
                InFlight {
                    tb: TransportBlock {
                        ue,
                        bytes,
                        mcs: mcs.index,
                        slot,
                        attempt: 1,
                    },
                    segments,
                }
            }
        };
        let beta = self
            .setup
            .mcs
            .get(flight.tb.mcs)
            .map(|e| e.beta)
            .ok_or_else(|| Error::Invariant(format!("MCS {} vanished", flight.tb.mcs)))?;
        let eff = if report.effective_db == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            effective_sinr(&report.per_subband_db, beta)?
        };
        for s in &flight.segments {
            let p = &mut self.packets[s.packet as usize];
            p.attempts = p.attempts.max(flight.tb.attempt);
        }
        if !tb_error(&mut self.l2sm_rng, &self.setup.l2sm, flight.tb.mcs, eff)? {
            self.stats.delivered += 1;
            let t_rx = ns_to_s(t + self.clock.slot_ns);
            for s in flight.segments.iter().filter(|s| s.completes) {
                let p = &mut self.packets[s.packet as usize];
                if p.advance(PacketStatus::Delivered) {
                    p.t_rx = Some(t_rx);
                }
            }
            return Ok(());
        }
        match arq_on_failure(&flight.tb, self.setup.phy.max_retx) {
            ArqOutcome::Retransmit(tb) => {
                self.pending.insert(
                    ue,
                    InFlight {
                        tb,
                        segments: flight.segments,
                    },
                );
            }
            ArqOutcome::Drop => {
                self.stats.dropped += 1;
                let q = self.queues.get_mut(&ue).expect("queue per UE");
                for s in &flight.segments {
                    self.packets[s.packet as usize].advance(PacketStatus::Lost);
                    // the rest of a split packet is useless now
                    if !s.completes {
                        q.discard_head(s.packet);
                    }
                }
            }
        }
        Ok(())
    }
}

/// Runs one simulation of `duration_s` seconds.
pub fn simulate(setup: &SimSetup, model: &LinkModel, seed: u64, duration_s: f64) -> Result<RunOutput> {
    if !(duration_s > 0.0) {
        return Err(Error::config("duration_s", "duration must be > 0"));
    }
    let ues = model.ue_ids();
    let clock = SlotClock::new(s_to_ns(setup.phy.slot_s))?;
    let mut engine = Engine {
        setup,
        model,
        seed,
        end_ns: s_to_ns(duration_s),
        clock,
        coherence_ns: s_to_ns(model.coherence_s()).max(1),
        events: EventQueue::default(),
        packets: Vec::new(),
        queues: ues.iter().map(|&u| (u, FlowQueue::new(setup.traffic.queue_bytes))).collect(),
        pending: BTreeMap::new(),
        scheduler: RoundRobin::new(),
        links: None,
        trace: SinrTrace::default(),
        l2sm_rng: stream(seed, "l2sm", &[]),
        stats: TbStats::default(),
    };
    let src = setup.traffic.source();
    engine.events.schedule(0, EventKind::ChannelExpiry { interval: 0 })?;
    for &ue in &ues {
        if src.interval_ns() < engine.end_ns {
            engine.events.schedule(src.interval_ns(), EventKind::Arrival { ue })?;
        }
    }
    engine.events.schedule(0, EventKind::SlotTick { slot: 0 })?;
    engine.events.schedule(engine.end_ns, EventKind::End)?;

    while let Some(ev) = engine.events.pop() {
        match ev.kind {
            EventKind::ChannelExpiry { interval } => engine.on_expiry(interval)?,
            EventKind::Arrival { ue } => engine.on_arrival(ue)?,
            EventKind::SlotTick { slot } => engine.on_slot(slot)?,
            EventKind::End => break,
        }
    }

    engine.stats.in_flight_at_end = engine.pending.len() as u64;
    let Engine {
        packets, trace, stats, ..
    } = engine;
    if stats.created != stats.delivered + stats.dropped + stats.in_flight_at_end {
        return Err(Error::Invariant(format!("transport blocks not conserved: {stats:?}")));
    }
    for p in &packets {
        if let (PacketStatus::Delivered, Some(rx)) = (p.status, p.t_rx) {
            if rx <= p.t_gen {
                return Err(Error::Invariant(format!("packet {} received before generation", p.id)));
            }
        }
    }
    let summary = summarize(&packets, &ues, &trace, duration_s)?;
    Ok(RunOutput {
        summary,
        trace,
        packets,
        tb_stats: stats,
        ues,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn events_pop_in_time_then_fifo_order() {
        let mut q = EventQueue::default();
        q.schedule(10, EventKind::End).unwrap();
        q.schedule(5, EventKind::Arrival { ue: 2 }).unwrap();
        q.schedule(5, EventKind::SlotTick { slot: 0 }).unwrap();
        q.schedule(5, EventKind::Arrival { ue: 1 }).unwrap();
        let order: Vec<EventKind> = std::iter::from_fn(|| q.pop()).map(|e| e.kind).collect();
        assert_eq!(
            order,
            vec![
                EventKind::Arrival { ue: 2 },
                EventKind::SlotTick { slot: 0 },
                EventKind::Arrival { ue: 1 },
                EventKind::End
            ]
        );
        assert!(matches!(q.schedule(3, EventKind::End), Err(Error::Invariant(_))));
    }
}
