//! Fixtures shared by the benchmarks.

use heraldkit::{ScenarioConfig, ScenarioKind};

/// Noise-free waveplate scenario with `n_events` heralds.
pub fn bench_config(scenario: ScenarioKind, n_events: usize) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::new(7);
    cfg.scenario = scenario;
    cfg.n_events = n_events;
    cfg
}
