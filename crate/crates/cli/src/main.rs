//! `relay-sim`: run one simulation or a campaign over a relay grid.
//!
//! Exit codes: 0 on success, 2 for configuration errors, 3 when a runtime
//! invariant is violated.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use relaysim::sim::{self, campaign, RelaySpec, RunConfig};
use relaysim::Error;

#[derive(Parser)]
#[command(name = "relay-sim", version, about = "IRS / AF relay assisted mmWave link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario with an optional relay override.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// `irs:HxV`, `af:HxV:gain_db` or `none`.
        #[arg(long)]
        relay: Option<String>,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write `packets.csv`.
        #[arg(long)]
        trace_packets: bool,
    },
    /// Run every (relay, seed) cell of a grid file.
    Campaign {
        #[arg(long)]
        scenario: PathBuf,
        /// One relay spec per line; `#` starts a comment.
        #[arg(long)]
        grid: PathBuf,
        /// Number of seeds, numbered from 1.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run { scenario, relay, duration, seed, out, trace_packets } => {
            let mut cfg = RunConfig::new(scenario);
            cfg.relay_override = relay.map(|r| r.parse::<RelaySpec>()).transpose()?;
            cfg.duration_s = duration;
            cfg.seed = seed;
            cfg.out_dir = out;
            cfg.trace_packets = trace_packets;
            let res = sim::run(&cfg)?;
            println!("run {}", res.label.run_id);
            for (ue, m) in &res.output.summary.per_ue {
                println!(
                    "  ue {ue}: throughput {:.3} Mbps, p95 latency {}, PER {}, mean SINR {}",
                    m.throughput_bps / 1e6,
                    fmt_opt(m.latency_p95_s.map(|s| s * 1e3), "ms"),
                    fmt_opt(m.per, ""),
                    fmt_opt(m.sinr_mean_db, "dB"),
                );
            }
        }
        Command::Campaign { scenario, grid, seeds, duration, out } => {
            if seeds == 0 {
                return Err(Error::config("seeds", "need at least one seed"));
            }
            let grid = campaign::read_grid(&grid)?;
            let mut base = RunConfig::new(scenario);
            base.duration_s = duration;
            let seeds: Vec<u64> = (1..=seeds).collect();
            let res = campaign::sweep_campaign(&base, &grid, &seeds, Some(&out))?;
            for a in &res.aggregate {
                println!(
                    "{:<14} throughput {:8.3} +- {:.3} Mbps, PER {}, mean SINR {}",
                    a.relay,
                    a.throughput_bps_mean / 1e6,
                    a.throughput_bps_std / 1e6,
                    fmt_opt(a.per_mean, ""),
                    fmt_opt(a.sinr_mean_db_mean, "dB"),
                );
            }
            println!("{} rows written to {}", res.rows.len(), out.join("summary.csv").display());
        }
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>, unit: &str) -> String {
    match v {
        Some(x) if unit.is_empty() => format!("{x:.4}"),
        Some(x) => format!("{x:.2} {unit}"),
        None => "n/a".into(),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("relay-sim: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
