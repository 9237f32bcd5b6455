//! Link-to-system mapping, adaptive MCS selection, transport-block sizing,
//! round-robin TDMA scheduling and ARQ.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scenario::NodeId;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McsEntry {
    pub index: u32,
    pub min_sinr_db: f64,
    /// Bits/s/Hz.
    pub spectral_eff: f64,
    /// EESM calibration factor.
    pub beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsTable {
    pub entries: Vec<McsEntry>,
}

impl Default for McsTable {
    /// Ten CQI-like entries from -6 to 22 dB. The top efficiencies flatten
    /// out near 3 bits/s/Hz, the practical ceiling once coding and MIMO-rank
    /// limits of a single-stream link are accounted for.
    fn default() -> Self {
        const ROWS: [(f64, f64); 10] = [
            (-6.0, 0.15),
            (-3.0, 0.38),
            (0.0, 0.60),
            (3.0, 0.88),
            (6.0, 1.18),
            (9.0, 1.91),
            (12.0, 2.60),
            (15.0, 2.80),
            (18.0, 2.95),
            (22.0, 3.05),
        ];
        Self {
            entries: ROWS
                .iter()
                .enumerate()
                .map(|(i, &(min_sinr_db, spectral_eff))| McsEntry {
                    index: i as u32,
                    min_sinr_db,
                    spectral_eff,
                    beta: 1.0,
                })
                .collect(),
        }
    }
}

impl McsTable {
    pub fn new(mut entries: Vec<McsEntry>) -> Result<Self> {
        entries.sort_by_key(|e| e.index);
        let t = Self { entries };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.entries.is_empty() {
            return Err(Error::config("mcs", "table is empty"));
        }
        for w in self.entries.windows(2) {
            if w[1].index <= w[0].index || w[1].min_sinr_db <= w[0].min_sinr_db {
                return Err(Error::config("mcs", "indices and thresholds must increase strictly"));
            }
        }
        if self.entries.iter().any(|e| !(e.spectral_eff > 0.0) || !(e.beta > 0.0)) {
            return Err(Error::config("mcs", "spectral_eff and beta must be > 0"));
        }
        Ok(())
    }

    /// Reads `index,min_sinr_db,spectral_eff,beta` rows.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let rows = rdr.deserialize().collect::<std::result::Result<Vec<McsEntry>, _>>()?;
        Self::new(rows)
    }

    pub fn get(&self, index: u32) -> Option<&McsEntry> {
        self.entries.iter().find(|e| e.index == index)
    }
}

/// Highest entry whose threshold does not exceed `eff_sinr_db`; `None`
/// means the link cannot carry any MCS and nothing is transmitted.
pub fn select_mcs(table: &McsTable, eff_sinr_db: f64) -> Option<&McsEntry> {
    table.entries.iter().rev().find(|e| e.min_sinr_db <= eff_sinr_db)
}

/// BLER-vs-SINR curve of one MCS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlerCurve {
    pub mcs: u32,
    pub sinr_db: Vec<f64>,
    pub bler: Vec<f64>,
}

impl BlerCurve {
    /// Linear interpolation, clamped at both ends of the grid.
    pub fn bler_at(&self, sinr_db: f64) -> f64 {
        let x = &self.sinr_db;
        if sinr_db.is_nan() || sinr_db <= x[0] {
            return self.bler[0];
        }
        if sinr_db >= x[x.len() - 1] {
            return self.bler[x.len() - 1];
        }
        let i = x.partition_point(|&v| v <= sinr_db) - 1;
        let w = (sinr_db - x[i]) / (x[i + 1] - x[i]);
        self.bler[i] + w * (self.bler[i + 1] - self.bler[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L2smTable {
    pub curves: Vec<BlerCurve>,
}

/// Steepness of the default logistic curves, dB.
pub const DEFAULT_STEEPNESS_DB: f64 = 1.0;

impl L2smTable {
    /// Logistic curves `1 / (1 + exp((s - c) / k))` placed so that every MCS
    /// reaches a BLER of exactly 0.1 at its selection threshold.
    pub fn logistic(mcs: &McsTable, steepness_db: f64) -> Self {
        let grid: Vec<f64> = (0..=240).map(|i| -20.0 + 0.25 * i as f64).collect();
        let curves = mcs
            .entries
            .iter()
            .map(|e| {
                let c = e.min_sinr_db - steepness_db * 9f64.ln();
                BlerCurve {
                    mcs: e.index,
                    bler: grid
                        .iter()
                        .map(|&s| 1.0 / (1.0 + ((s - c) / steepness_db).exp()))
                        .collect(),
                    sinr_db: grid.clone(),
                }
            })
            .collect();
        Self { curves }
    }

    pub fn validate(&self) -> Result<()> {
        for c in &self.curves {
            if c.sinr_db.is_empty() || c.sinr_db.len() != c.bler.len() {
                return Err(Error::config("l2sm", format!("MCS {}: empty or ragged curve", c.mcs)));
            }
            if c.sinr_db.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("l2sm", format!("MCS {}: SINR grid not sorted", c.mcs)));
            }
            if c.bler.iter().any(|b| !(0.0..=1.0).contains(b)) || c.bler.windows(2).any(|w| w[1] > w[0]) {
                return Err(Error::config(
                    "l2sm",
                    format!("MCS {}: BLER must lie in [0, 1] and not increase", c.mcs),
                ));
            }
        }
        Ok(())
    }

    /// Reads `mcs,sinr_db,bler` rows.
    pub fn from_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            mcs: u32,
            sinr_db: f64,
            bler: f64,
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let mut curves: Vec<BlerCurve> = Vec::new();
        for row in rdr.deserialize::<Row>() {
            let row = row?;
            match curves.iter_mut().find(|c| c.mcs == row.mcs) {
                Some(c) => {
                    c.sinr_db.push(row.sinr_db);
                    c.bler.push(row.bler);
                }
                None => curves.push(BlerCurve {
                    mcs: row.mcs,
                    sinr_db: vec![row.sinr_db],
                    bler: vec![row.bler],
                }),
            }
        }
        let t = Self { curves };
        t.validate()?;
        Ok(t)
    }

    pub fn curve(&self, mcs: u32) -> Option<&BlerCurve> {
        self.curves.iter().find(|c| c.mcs == mcs)
    }

    pub fn bler(&self, mcs: u32, sinr_db: f64) -> Result<f64> {
        self.curve(mcs)
            .map(|c| c.bler_at(sinr_db))
            .ok_or_else(|| Error::Invariant(format!("MCS {mcs} missing from the L2SM table")))
    }
}

/// Draws the fate of a transport block: `true` means decoding failed.
pub fn tb_error<R: Rng + ?Sized>(rng: &mut R, table: &L2smTable, mcs: u32, eff_sinr_db: f64) -> Result<bool> {
    let p = table.bler(mcs, eff_sinr_db)?;
    let u: f64 = rng.random();
    Ok(u < p)
}

/// Slot timing, kept in integer nanoseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotClock {
    pub slot_ns: u64,
    pub slots_elapsed: u64,
}

impl SlotClock {
    /// 120 kHz subcarrier spacing numerology.
    pub const DEFAULT_SLOT_NS: u64 = 125_000;

    pub fn new(slot_ns: u64) -> Result<Self> {
        if slot_ns == 0 {
            return Err(Error::config("mac.slot_s", "slot duration must be > 0"));
        }
        Ok(Self {
            slot_ns,
            slots_elapsed: 0,
        })
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_ns as f64 * 1e-9
    }
}

impl Default for SlotClock {
    fn default() -> Self {
        Self::new(Self::DEFAULT_SLOT_NS).expect("non-zero")
    }
}

/// `floor(eff * B * T_slot * (1 - overhead) / 8)` bytes.
pub fn tb_size_bytes(mcs: &McsEntry, bandwidth_hz: f64, slot: &SlotClock, overhead_frac: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&overhead_frac) {
        return Err(Error::Domain(format!("overhead fraction {overhead_frac} outside [0, 1)")));
    }
    let bits = mcs.spectral_eff * bandwidth_hz * slot.slot_duration() * (1.0 - overhead_frac);
    // guard against 2499.9999... from binary rounding of exact products
    Ok(((bits / 8.0) * (1.0 + 1e-12)).floor().max(0.0) as u64)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransportBlock {
    pub ue: NodeId,
    pub bytes: u64,
    pub mcs: u32,
    pub slot: u64,
    /// 1 for the first transmission.
    pub attempt: u32,
}

/// Round-robin TDMA scheduler over UEs with data, in id order.
#[derive(Debug, Clone, Default)]
pub struct RoundRobin {
    last: Option<NodeId>,
}

impl RoundRobin {
    pub fn new() -> Self {
        Self::default()
    }

    /// Serves the first backlogged UE after the one served last, wrapping
    /// around; `None` is an idle slot.
    pub fn schedule(&mut self, ues_with_backlog: &[NodeId], _slot: u64) -> Option<NodeId> {
        let next = match self.last {
            Some(last) => ues_with_backlog
                .iter()
                .copied()
                .filter(|&u| u > last)
                .min()
                .or_else(|| ues_with_backlog.iter().copied().min()),
            None => ues_with_backlog.iter().copied().min(),
        };
        if next.is_some() {
            self.last = next;
        }
        next
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArqOutcome {
    Retransmit(TransportBlock),
    Drop,
}

/// Retransmits while the failed attempt number is within `max_retx`.
pub fn arq_on_failure(tb: &TransportBlock, max_retx: u32) -> ArqOutcome {
    if tb.attempt <= max_retx {
        ArqOutcome::Retransmit(TransportBlock {
            attempt: tb.attempt + 1,
            ..tb.clone()
        })
    } else {
        ArqOutcome::Drop
    }
}
