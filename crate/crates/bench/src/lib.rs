//! Shared fixtures for the criterion benches.

use wvkerr_core::ensemble::{poissonian, sine_modulated_with_std};
use wvkerr_core::{InteractionParams, ProbeEnsemble, TrialConfig};

pub const EPSILON: f64 = 0.1;
pub const MEAN_N: f64 = 9e4;

/// Modulated probe at the usual operating point, `Δn = N/2`.
pub fn modulated() -> ProbeEnsemble {
    sine_modulated_with_std(MEAN_N, 0.5 * MEAN_N, true, 128).expect("valid ensemble")
}

pub fn coherent() -> ProbeEnsemble {
    poissonian(MEAN_N, 1e-12).expect("valid ensemble")
}

pub fn params() -> InteractionParams {
    InteractionParams::new(6e-8, 0.0, EPSILON).expect("valid parameters")
}

pub fn batch(ensemble: ProbeEnsemble, total_trials: u64) -> TrialConfig {
    TrialConfig::new(ensemble, params(), total_trials, 1)
}
