use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/scenarios").join(name)
}

fn relay_sim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relay-sim")).args(args).output().unwrap()
}

#[test]
fn run_writes_every_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("scenario1.json");
    let out = relay_sim(&[
        "run", "--scenario", sc.to_str().unwrap(), "--relay", "af:8x8:40", "--duration", "0.05",
        "--seed", "3", "--out", dir.path().to_str().unwrap(), "--trace-packets",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["summary.csv", "sinr_trace.csv", "packets.csv", "run_meta.json"] {
        assert!(dir.path().join(f).is_file(), "missing {f}");
    }
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with(
        "run_id,scenario,relay_kind,relay_elems,amp_gain_db,seed,ue,throughput_bps,latency_p95_ms,latency_mean_ms,per,sinr_mean_db"
    ));
    let trace = fs::read_to_string(dir.path().join("sinr_trace.csv")).unwrap();
    assert!(trace.starts_with("t_s,ue,eff_sinr_db"));
}

#[test]
fn packets_csv_only_on_request() {
    let dir = tempfile::tempdir().unwrap();
    let sc = scenario("scenario1.json");
    let out = relay_sim(&["run", "--scenario", sc.to_str().unwrap(), "--relay", "none", "--duration", "0.01", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(!dir.path().join("packets.csv").exists());
}

#[test]
fn config_errors_exit_with_2() {
    let sc = scenario("scenario1.json");
    let bad_relay = relay_sim(&["run", "--scenario", sc.to_str().unwrap(), "--relay", "irs:0x4"]);
    assert_eq!(bad_relay.status.code(), Some(2));
    let missing = relay_sim(&["run", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("scenario.json"));
    let bad_duration = relay_sim(&["run", "--scenario", sc.to_str().unwrap(), "--duration", "0"]);
    assert_eq!(bad_duration.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_duration.stderr).contains("duration"));
}

#[test]
fn campaign_writes_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.txt");
    fs::write(&grid, "# small grid\nnone\naf:4x4:40\n").unwrap();
    let out_dir = dir.path().join("out");
    let sc = scenario("scenario1.json");
    let out = relay_sim(&[
        "campaign", "--scenario", sc.to_str().unwrap(), "--grid", grid.to_str().unwrap(), "--seeds", "2",
        "--duration", "0.02", "--out", out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 4);
    assert!(out_dir.join("aggregate.csv").is_file());
}

#[test]
fn empty_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.txt");
    fs::write(&grid, "# nothing\n").unwrap();
    let sc = scenario("scenario1.json");
    let out = relay_sim(&[
        "campaign", "--scenario", sc.to_str().unwrap(), "--grid", grid.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}
