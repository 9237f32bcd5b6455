//! CSV and JSON emission for runs and campaigns.

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::sim::engine::RunOutput;
use crate::traffic::UeMetrics;
use crate::{Error, Result};

/// Identity columns shared by every summary row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunLabel {
    pub run_id: String,
    pub scenario: String,
    pub relay_kind: String,
    pub relay_elems: usize,
    pub amp_gain_db: f64,
    pub seed: u64,
}

/// One `summary.csv` row. `ue` is a UE id, or `all` for the UE mean in
/// campaign tables. Absent values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub run_id: String,
    pub scenario: String,
    pub relay_kind: String,
    pub relay_elems: usize,
    pub amp_gain_db: f64,
    pub seed: u64,
    pub ue: String,
    pub throughput_bps: f64,
    pub latency_p95_ms: Option<f64>,
    pub latency_mean_ms: Option<f64>,
    pub per: Option<f64>,
    pub sinr_mean_db: Option<f64>,
}

impl SummaryRow {
    pub fn new(label: &RunLabel, ue: String, m: &UeMetrics) -> Self {
        Self {
            run_id: label.run_id.clone(),
            scenario: label.scenario.clone(),
            relay_kind: label.relay_kind.clone(),
            relay_elems: label.relay_elems,
            amp_gain_db: label.amp_gain_db,
            seed: label.seed,
            ue,
            throughput_bps: m.throughput_bps,
            latency_p95_ms: m.latency_p95_s.map(|s| s * 1e3),
            latency_mean_ms: m.latency_mean_s.map(|s| s * 1e3),
            per: m.per,
            sinr_mean_db: m.sinr_mean_db,
        }
    }
}

pub fn summary_rows(label: &RunLabel, out: &RunOutput) -> Vec<SummaryRow> {
    out.summary
        .per_ue
        .iter()
        .map(|(ue, m)| SummaryRow::new(label, ue.to_string(), m))
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub const SUMMARY_HEADER: [&str; 12] = [
    "run_id",
    "scenario",
    "relay_kind",
    "relay_elems",
    "amp_gain_db",
    "seed",
    "ue",
    "throughput_bps",
    "latency_p95_ms",
    "latency_mean_ms",
    "per",
    "sinr_mean_db",
];

#[derive(Serialize)]
struct PacketRow {
    id: u64,
    ue: u32,
    t_gen_s: f64,
    t_rx_s: Option<f64>,
    status: &'static str,
    attempts: u32,
}

/// Writes `summary.csv`, `sinr_trace.csv` and, optionally, `packets.csv`.
pub fn write_run_files(dir: &Path, label: &RunLabel, out: &RunOutput, trace_packets: bool) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(&dir.join("summary.csv"), &summary_rows(label, out), &SUMMARY_HEADER)?;
    write_csv(&dir.join("sinr_trace.csv"), &out.trace.rows, &["t_s", "ue", "eff_sinr_db"])?;
    if trace_packets {
        let rows: Vec<PacketRow> = out
            .packets
            .iter()
            .map(|p| PacketRow {
                id: p.id,
                ue: p.ue,
                t_gen_s: p.t_gen,
                t_rx_s: p.t_rx,
                status: p.status.as_str(),
                attempts: p.attempts,
            })
            .collect();
        write_csv(
            &dir.join("packets.csv"),
            &rows,
            &["id", "ue", "t_gen_s", "t_rx_s", "status", "attempts"],
        )?;
    }
    Ok(())
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
