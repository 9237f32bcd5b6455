//! Structural invariants over random inputs and full simulation runs.

mod common;

use proptest::prelude::*;
use relaysim::sim::{run_setup, RelaySpec, SimSetup};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn irs_configuration_is_an_isometry(seed in any::<u64>()) {
        prop_assert!(common::irs_isometry_case(seed) < 1e-12);
    }

    #[test]
    fn cluster_powers_sum_to_one(seed in any::<u64>()) {
        prop_assert!(common::power_normalization_case(seed) <= 1e-9);
    }

    #[test]
    fn eesm_stays_within_subband_extremes(seed in any::<u64>()) {
        prop_assert!(common::eesm_bounds_case(seed));
    }

    #[test]
    fn psds_ignore_global_phases(seed in any::<u64>()) {
        let d = common::phase_invariance_case(seed);
        prop_assert!(d < 1e-12, "relative change {d:e}");
    }
}

fn short_run(spec: &str, scenario: &str, seed: u64, duration: f64) -> (SimSetup, relaysim::sim::RunOutput) {
    let setup = SimSetup::from_path(&common::scenario_path(scenario), Some(spec.parse::<RelaySpec>().unwrap())).unwrap();
    let out = run_setup(&setup, seed, duration).unwrap().output;
    (setup, out)
}

#[test]
fn packets_are_conserved() {
    for (spec, scenario) in [
        ("af:4x4:40", "scenario2.json"),
        ("af:16x16:40", "scenario1.json"),
        ("irs:20x40", "scenario1.json"),
        ("none", "scenario1.json"),
    ] {
        let (setup, out) = short_run(spec, scenario, 3, 0.3);
        common::packet_conservation(&setup, &out, 0.3).unwrap_or_else(|e| panic!("{spec}: {e}"));
    }
}

#[test]
fn fixed_seed_replays_bit_identically() {
    let (_, a) = short_run("af:4x4:40", "scenario2.json", 11, 0.25);
    let (_, b) = short_run("af:4x4:40", "scenario2.json", 11, 0.25);
    assert_eq!(common::run_fingerprint(&a), common::run_fingerprint(&b));
    let (_, c) = short_run("af:4x4:40", "scenario2.json", 12, 0.25);
    assert_ne!(common::run_fingerprint(&a), common::run_fingerprint(&c));
}
