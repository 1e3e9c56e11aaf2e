//! Fixtures shared by the benchmarks.

use aeroswarm_core::config::{Phase, PhaseSpan};
use aeroswarm_core::env::{reset, WorldState};
use aeroswarm_core::rng::{stream, Purpose};
use aeroswarm_core::ScenarioConfig;

/// Default configuration with `n` UAVs and `m` users in every phase.
pub fn config(n: usize, m: usize) -> ScenarioConfig {
    let mut c = ScenarioConfig::default();
    c.world.n_uavs = n;
    c.world.users.set_all(m);
    c.scenario.schedule = vec![PhaseSpan { phase: Phase::Urban, episodes: 10 }];
    c
}

pub fn world(cfg: &ScenarioConfig) -> WorldState {
    reset(cfg, 0, &mut stream(cfg.seed, Purpose::Environment, 0)).expect("bench layout").0
}
