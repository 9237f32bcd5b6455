//! Cartesian campaigns over relay configurations and seeds.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::sim::config::{RelaySpec, RunConfig};
use crate::sim::output::{write_csv, SummaryRow, SUMMARY_HEADER};
use crate::sim::{run, RunResult};
use crate::traffic::UeMetrics;
use crate::{Error, Result};

/// Reads a grid file: one relay spec per line; blank lines and `#`
/// comments are ignored.
pub fn parse_grid(text: &str) -> Result<Vec<RelaySpec>> {
    let specs: Vec<RelaySpec> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if specs.is_empty() {
        return Err(Error::config("grid", "relay grid is empty"));
    }
    Ok(specs)
}

pub fn read_grid(path: &Path) -> Result<Vec<RelaySpec>> {
    parse_grid(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Mean and sample standard deviation of one KPI across seeds.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub relay: String,
    pub relay_kind: String,
    pub relay_elems: usize,
    pub amp_gain_db: f64,
    pub n_seeds: usize,
    pub throughput_bps_mean: f64,
    pub throughput_bps_std: f64,
    pub latency_p95_ms_mean: Option<f64>,
    pub latency_p95_ms_std: Option<f64>,
    pub per_mean: Option<f64>,
    pub per_std: Option<f64>,
    pub sinr_mean_db_mean: Option<f64>,
    pub sinr_mean_db_std: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct CampaignResult {
    /// One row per (config, seed), KPIs averaged over UEs.
    pub rows: Vec<SummaryRow>,
    pub aggregate: Vec<AggregateRow>,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 {
        (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (Some(m), Some(s))
}

/// UE-mean row of one run.
pub fn mean_row(r: &RunResult) -> SummaryRow {
    let s = &r.output.summary;
    let mean = UeMetrics {
        throughput_bps: s.mean_over_ues(|m| Some(m.throughput_bps)).unwrap_or(0.0),
        latency_p95_s: s.mean_over_ues(|m| m.latency_p95_s),
        latency_mean_s: s.mean_over_ues(|m| m.latency_mean_s),
        per: s.mean_over_ues(|m| m.per),
        sinr_mean_db: s.mean_over_ues(|m| m.sinr_mean_db),
        generated: 0,
        delivered: 0,
        lost: 0,
        pending: 0,
    };
    SummaryRow::new(&r.label, "all".into(), &mean)
}

/// Runs every (relay, seed) cell. Each run writes into
/// `<out>/runs/<run_id>/`; the campaign writes `summary.csv` and
/// `aggregate.csv` into `out`.
pub fn sweep_campaign(base: &RunConfig, grid: &[RelaySpec], seeds: &[u64], out: Option<&Path>) -> Result<CampaignResult> {
    if grid.is_empty() || seeds.is_empty() {
        return Err(Error::config("grid", "campaign needs at least one relay config and one seed"));
    }
    let cells: Vec<(usize, u64)> = (0..grid.len()).flat_map(|g| seeds.iter().map(move |&s| (g, s))).collect();
    let results: Vec<RunResult> = cells
        .par_iter()
        .map(|&(g, seed)| {
            let mut cfg = base.clone();
            cfg.relay_override = Some(grid[g].clone());
            cfg.seed = seed;
            cfg.out_dir = out.map(|o| run_dir(o, &grid[g], seed));
            run(&cfg).map_err(|e| Error::Cell {
                cell: format!("{} seed {}", grid[g], seed),
                source: Box::new(e),
            })
        })
        .collect::<Result<_>>()?;
    let rows: Vec<SummaryRow> = results.iter().map(mean_row).collect();
    let aggregate: Vec<AggregateRow> = grid
        .iter()
        .enumerate()
        .map(|(g, spec)| {
            let mine: Vec<&SummaryRow> = rows[g * seeds.len()..(g + 1) * seeds.len()].iter().collect();
            let col = |f: &dyn Fn(&SummaryRow) -> Option<f64>| -> Vec<f64> { mine.iter().filter_map(|r| f(r)).collect() };
            let (tm, ts) = mean_std(&col(&|r| Some(r.throughput_bps)));
            let (lm, ls) = mean_std(&col(&|r| r.latency_p95_ms));
            let (pm, ps) = mean_std(&col(&|r| r.per));
            let (sm, ss) = mean_std(&col(&|r| r.sinr_mean_db));
            AggregateRow {
                relay: spec.to_string(),
                relay_kind: spec.kind.to_ascii_lowercase(),
                relay_elems: spec.n_elements(),
                amp_gain_db: spec.amp_gain_db,
                n_seeds: seeds.len(),
                throughput_bps_mean: tm.unwrap_or(0.0),
                throughput_bps_std: ts.unwrap_or(0.0),
                latency_p95_ms_mean: lm,
                latency_p95_ms_std: ls,
                per_mean: pm,
                per_std: ps,
                sinr_mean_db_mean: sm,
                sinr_mean_db_std: ss,
            }
        })
        .collect();
    if let Some(o) = out {
        fs::create_dir_all(o).map_err(|e| Error::io(o, e))?;
        write_csv(&o.join("summary.csv"), &rows, &SUMMARY_HEADER)?;
        write_csv(&o.join("aggregate.csv"), &aggregate, &[])?;
    }
    Ok(CampaignResult { rows, aggregate })
}

/// Directory of the run for `spec` and `seed` inside a campaign output.
pub fn run_dir(out: &Path, spec: &RelaySpec, seed: u64) -> PathBuf {
    out.join("runs").join(format!("{}_s{}", spec.to_string().replace(':', "-"), seed))
}
