//! Fixtures shared by the benchmarks.

use ifedcrowd::harness::sample_population;
use ifedcrowd::{feasible_rate_box, ClientProfile, RateBox, ScenarioConfig, SystemParams};

/// A default-scenario population of `n` workers with its parameters and
/// rate box.
pub fn population(n: usize, seed: u64) -> (Vec<ClientProfile>, SystemParams, RateBox) {
    let cfg = ScenarioConfig {
        n,
        seed,
        ..ScenarioConfig::default()
    };
    let profiles = sample_population(&cfg, 0).expect("default scenario samples");
    let rate_box =
        feasible_rate_box(&profiles, cfg.r2_cap).expect("default scenario has a rate box");
    (
        profiles,
        cfg.params().expect("default params are valid"),
        rate_box,
    )
}
