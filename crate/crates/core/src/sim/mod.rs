//! Simulation orchestration: configuration, the event loop, link
//! evaluation, output files and multi-run campaigns.

pub mod campaign;
pub mod config;
pub mod engine;
pub mod link;
pub mod output;

use std::time::Instant;

use serde_json::json;

use crate::Result;
pub use config::{RelaySpec, RunConfig, ScenarioFile, SimSetup};
pub use engine::{simulate, RunOutput};
pub use link::LinkModel;
pub use output::{RunLabel, SummaryRow};

/// Result of [`run`]: the labelled output of one simulation.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub label: RunLabel,
    pub output: RunOutput,
}

pub fn label_for(setup: &SimSetup, seed: u64) -> RunLabel {
    let relay = &setup.relay;
    let tag = relay.to_string().replace(':', "-");
    RunLabel {
        run_id: format!("{}_{}_s{}", setup.scenario.name, tag, seed),
        scenario: setup.scenario.name.clone(),
        relay_kind: relay.kind.to_ascii_lowercase(),
        relay_elems: relay.n_elements(),
        amp_gain_db: relay.amp_gain_db,
        seed,
    }
}

/// Simulates an already resolved setup without touching the filesystem.
pub fn run_setup(setup: &SimSetup, seed: u64, duration_s: f64) -> Result<RunResult> {
    let model = LinkModel::new(setup)?;
    let output = simulate(setup, &model, seed, duration_s)?;
    Ok(RunResult {
        label: label_for(setup, seed),
        output,
    })
}

/// Full run: loads the configuration, simulates, and writes every output
/// file when `out_dir` is set.
pub fn run(config: &RunConfig) -> Result<RunResult> {
    let started = Instant::now();
    let setup = config.setup()?;
    let model = LinkModel::new(&setup)?;
    let output = simulate(&setup, &model, config.seed, config.duration_s)?;
    let label = label_for(&setup, config.seed);
    if let Some(dir) = &config.out_dir {
        output::write_run_files(dir, &label, &output, config.trace_packets)?;
        let hops: Vec<_> = model
            .hop_losses()
            .into_iter()
            .map(|(name, d, loss)| json!({"link": name, "distance_m": d, "loss_db": loss}))
            .collect();
        let meta = json!({
            "run_id": label.run_id,
            "code_version": env!("CARGO_PKG_VERSION"),
            "config": config,
            "resolved": {
                "scenario": setup.file,
                "relay": setup.relay,
                "channel": setup.channel,
                "traffic": setup.traffic,
                "phy": setup.phy,
                "mcs": setup.mcs,
            },
            "hops": hops,
            "tb_stats": output.tb_stats,
            "wall_clock_s": started.elapsed().as_secs_f64(),
        });
        output::write_json(&dir.join("run_meta.json"), &meta)?;
    }
    Ok(RunResult { label, output })
}
