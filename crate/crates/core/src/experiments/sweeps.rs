//! One-dimensional campaigns: coupling (or delay), probe spread, and
//! post-selection offset. Each point is an independent batch with a seed
//! derived from the campaign seed and the point index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_gaussian, fit_linear, FitResult};
use crate::ensemble::{sine_modulated_with_std, ProbeEnsemble};
use crate::error::{invalid, Error, Result};
use crate::montecarlo::{derive_seed, run_batch, TrialBatch, TrialConfig};
use crate::quantum::im_weak_value_exact;

/// Quadrature nodes used when a sweep builds its own modulated ensembles
/// from a pmf base.
pub const DEFAULT_SWEEP_NODES: usize = 128;

/// How the coupling is varied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingAxis {
    /// Couplings in radians per photon.
    Direct { g_values: Vec<f64> },
    /// Probe delays; the coupling follows the pulse overlap
    /// `g(τ) = g_peak·exp(-τ²/(2 τ_c²))`.
    Delay {
        delays: Vec<f64>,
        g_peak: f64,
        tau_c: f64,
    },
}

impl CouplingAxis {
    pub fn axis_values(&self) -> &[f64] {
        match self {
            CouplingAxis::Direct { g_values } => g_values,
            CouplingAxis::Delay { delays, .. } => delays,
        }
    }

    pub fn couplings(&self) -> Vec<f64> {
        match self {
            CouplingAxis::Direct { g_values } => g_values.clone(),
            CouplingAxis::Delay {
                delays,
                g_peak,
                tau_c,
            } => delays
                .iter()
                .map(|t| g_peak * (-t * t / (2.0 * tau_c * tau_c)).exp())
                .collect(),
        }
    }
}

/// A coupling recovered from a fit, with its fit error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis_values: Vec<f64>,
    /// Coupling applied at each point, radians per photon.
    pub couplings: Vec<f64>,
    pub delta_n_normalized: Vec<f64>,
    /// `σ/(N√ν)` per point.
    pub standard_errors: Vec<f64>,
    pub batches: Vec<TrialBatch>,
    /// `None` when the data give the fitter nothing to resolve, e.g. a
    /// coupling sweep whose values are all equal or a delay curve lost in
    /// noise.
    pub fit: Option<FitResult>,
    /// Offset sweeps only: the same data fitted against `cot(ε/2)/2`.
    pub exact_convention_fit: Option<FitResult>,
    pub g_estimate: Option<Estimate>,
    pub g_estimate_exact: Option<Estimate>,
}

fn run_points(configs: Vec<TrialConfig>) -> Result<Vec<TrialBatch>> {
    configs.par_iter().map(run_batch).collect()
}

fn point_config(base: &TrialConfig, index: usize) -> TrialConfig {
    let mut c = base.clone();
    c.seed = derive_seed(base.seed, index as u64);
    c
}

fn require_points(values: &[f64]) -> Result<()> {
    if values.len() < 3 {
        return Err(invalid("sweep values", format!("need at least 3, got {}", values.len())));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("sweep values", "must be finite"));
    }
    Ok(())
}

fn assemble(axis_values: Vec<f64>, couplings: Vec<f64>, batches: Vec<TrialBatch>) -> SweepResult {
    SweepResult {
        axis_values,
        couplings,
        delta_n_normalized: batches.iter().map(|b| b.delta_n_normalized).collect(),
        standard_errors: batches.iter().map(|b| b.normalized_standard_error()).collect(),
        batches,
        fit: None,
        exact_convention_fit: None,
        g_estimate: None,
        g_estimate_exact: None,
    }
}

/// Error bars for fitting; a point with a single post-selection has no
/// spread estimate and gets the largest error of the sweep.
fn fit_errors(errors: &[f64]) -> Vec<f64> {
    let fallback = errors.iter().cloned().fold(0.0f64, f64::max);
    let fallback = if fallback > 0.0 { fallback } else { 1.0 };
    errors.iter().map(|&e| if e > 0.0 { e } else { fallback }).collect()
}

fn optional_fit(fit: Result<FitResult>) -> Result<Option<FitResult>> {
    match fit {
        Ok(f) => Ok(Some(f)),
        Err(Error::SingularFit | Error::NonConvergence { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Batch per coupling. A direct axis is fitted with a line (slope
/// `s = ∂δñ/∂g`); a delay axis with a Gaussian in the delay.
pub fn sweep_coupling(base: &TrialConfig, axis: &CouplingAxis) -> Result<SweepResult> {
    require_points(axis.axis_values())?;
    if let CouplingAxis::Delay { tau_c, g_peak, .. } = axis {
        if !(*tau_c > 0.0 && tau_c.is_finite()) {
            return Err(invalid("tau_c", format!("must be positive, got {tau_c}")));
        }
        if !g_peak.is_finite() {
            return Err(invalid("g_peak", "must be finite"));
        }
    }
    let couplings = axis.couplings();
    let configs = couplings
        .iter()
        .enumerate()
        .map(|(i, &g)| {
            let mut c = point_config(base, i);
            c.params = c.params.with_g(g);
            c
        })
        .collect();
    let batches = run_points(configs)?;
    let mut result = assemble(axis.axis_values().to_vec(), couplings, batches);
    let errors = fit_errors(&result.standard_errors);
    result.fit = match axis {
        CouplingAxis::Direct { .. } => optional_fit(fit_linear(
            &result.couplings,
            &result.delta_n_normalized,
            &errors,
        ))?,
        CouplingAxis::Delay { .. } => optional_fit(fit_gaussian(
            &result.axis_values,
            &result.delta_n_normalized,
            &errors,
        ))?,
    };
    Ok(result)
}

/// Batch per requested probe spread `Δn`, realized by sine modulation of the
/// base ensemble's mean. The slope of `δñ` against `Δn²` gives
/// `ĝ = slope·εN/2`.
pub fn sweep_variance(base: &TrialConfig, dn_values: &[f64]) -> Result<SweepResult> {
    require_points(dn_values)?;
    let mean_n = base.ensemble.mean_n();
    let (shot_noise, nodes) = match &base.ensemble {
        ProbeEnsemble::ModulatedContinuous(m) => (m.shot_noise, m.quadrature_nodes),
        ProbeEnsemble::DiscretePmf(_) => (true, DEFAULT_SWEEP_NODES),
    };
    let configs = dn_values
        .iter()
        .enumerate()
        .map(|(i, &dn)| {
            let mut c = point_config(base, i);
            c.ensemble = sine_modulated_with_std(mean_n, dn, shot_noise, nodes)?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let batches = run_points(configs)?;
    let g = base.params.g;
    let mut result = assemble(dn_values.to_vec(), vec![g; dn_values.len()], batches);
    let variances: Vec<f64> = dn_values.iter().map(|d| d * d).collect();
    let errors = fit_errors(&result.standard_errors);
    result.fit = optional_fit(fit_linear(&variances, &result.delta_n_normalized, &errors))?;
    let scale = base.params.epsilon * mean_n / 2.0;
    result.g_estimate = result.fit.as_ref().map(|f| Estimate {
        value: f.parameters[0] * scale,
        error: f.parameter_errors[0] * scale,
    });
    Ok(result)
}

/// Batch per post-selection offset. `δñ` is fitted against `1/ε` and,
/// separately, against the exact `cot(ε/2)/2`; either slope equals
/// `2gΔn²/N`.
pub fn sweep_epsilon(base: &TrialConfig, eps_values: &[f64]) -> Result<SweepResult> {
    require_points(eps_values)?;
    if let Some(e) = eps_values
        .iter()
        .find(|e| !(**e > 0.0 && **e < std::f64::consts::PI))
    {
        return Err(invalid("epsilon", format!("sweep values must lie in (0, π), got {e}")));
    }
    let configs = eps_values
        .iter()
        .enumerate()
        .map(|(i, &eps)| {
            let mut c = point_config(base, i);
            c.params = c.params.with_epsilon(eps);
            c
        })
        .collect();
    let batches = run_points(configs)?;
    let mut result = assemble(eps_values.to_vec(), vec![base.params.g; eps_values.len()], batches);
    let moments = base.ensemble.moments();
    let errors = fit_errors(&result.standard_errors);
    let inverse: Vec<f64> = eps_values.iter().map(|e| 1.0 / e).collect();
    let exact = eps_values
        .iter()
        .map(|&e| im_weak_value_exact(e))
        .collect::<Result<Vec<_>>>()?;
    result.fit = optional_fit(fit_linear(&inverse, &result.delta_n_normalized, &errors))?;
    result.exact_convention_fit = optional_fit(fit_linear(&exact, &result.delta_n_normalized, &errors))?;
    let to_g = |f: &FitResult| {
        let scale = moments.mean_n / (2.0 * moments.variance());
        Estimate {
            value: f.parameters[0] * scale,
            error: f.parameter_errors[0] * scale,
        }
    };
    if moments.std_dn > 0.0 {
        result.g_estimate = result.fit.as_ref().map(to_g);
        result.g_estimate_exact = result.exact_convention_fit.as_ref().map(to_g);
    }
    Ok(result)
}
