//! Shared fixtures for the benchmarks.

use dynsolow::dynamics::FullState;
use dynsolow::{ModelParams, ReducedState, RegimeMode, SimConfig};

pub fn base() -> ModelParams {
    ModelParams::BASE
}

/// A mid-cycle state away from every equilibrium.
pub fn sample_full_state() -> FullState {
    FullState {
        t: 12_345.0,
        y: 1.2,
        k_s: 7.5,
        k_d: 3.4,
        s: 0.3,
        h: -0.2,
        xi: 0.4,
    }
}

pub fn sample_reduced_state() -> ReducedState {
    ReducedState::new(0.3, -0.2, 0.01)
}

pub fn general_run(years: f64) -> SimConfig {
    SimConfig::years(&base(), RegimeMode::General, years, 1)
}
