//! Precision versus mean photon number.
//!
//! For every `N` on the grid the slope `s = ∂δñ/∂g` is read off a symmetric
//! five-point coupling sweep around the base coupling, the spread `σ` and
//! count `ν` come from a Monte Carlo batch at the base coupling, and the
//! precision is `Δg = 2σ/(s√ν)` with `σ` the spread of the normalized
//! readings. `log Δg` against `log N` is then fitted with a power law.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_linear, fit_powerlaw, FitResult};
use crate::ensemble::{poissonian, sine_modulated_with_std, ProbeEnsemble};
use crate::error::{invalid, Result};
use crate::estimation::postselected_mean_exact;
use crate::montecarlo::{derive_seed, run_batch, TrialBatch, TrialConfig};

/// Relative sweep offsets in units of the half-width.
pub const SWEEP_OFFSETS: [f64; 5] = [-1.0, -0.5, 0.0, 0.5, 1.0];
/// Points with fewer post-selections are left out of the power-law fit.
pub const MIN_POSTSELECTED_FOR_FIT: u64 = 100;
/// Smallest span of the grid, in decades.
pub const MIN_GRID_DECADES: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum VariancePolicy {
    /// `Δn = c·N` by sine modulation with shot noise.
    Proportional { ratio: f64 },
    /// Unmodulated coherent pulses, `Δn = √N`.
    Poissonian,
}

impl VariancePolicy {
    pub fn ensemble(&self, mean_n: f64, nodes: usize) -> Result<ProbeEnsemble> {
        match *self {
            VariancePolicy::Proportional { ratio } => {
                sine_modulated_with_std(mean_n, ratio * mean_n, true, nodes)
            }
            VariancePolicy::Poissonian => poissonian(mean_n, 1e-12),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlopeSource {
    /// Fit the exact post-selected shift at the sweep couplings.
    #[default]
    Exact,
    /// Fit Monte Carlo batches at the sweep couplings.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    /// Sweep half-width as a fraction of `ε/n_max`, `n_max` being the
    /// largest photon number the ensemble can produce.
    pub sweep_fraction: f64,
    /// Above this `N` the half-width stays at its value for this `N`,
    /// fixing the sweep in absolute coupling.
    pub freeze_above_n: Option<f64>,
    pub slope_source: SlopeSource,
    /// Sets `ν̃ = ⌈target / rate⌉` per point instead of the base trial count.
    pub target_postselected: Option<u64>,
    pub quadrature_nodes: usize,
}

impl Default for ScalingOptions {
    fn default() -> Self {
        Self {
            sweep_fraction: 0.5,
            freeze_above_n: None,
            slope_source: SlopeSource::Exact,
            target_postselected: None,
            quadrature_nodes: 128,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub mean_n: f64,
    pub std_dn: f64,
    /// `s = ∂δñ/∂g`, per radian.
    pub slope_s: f64,
    pub slope_error: f64,
    /// First-order slope `2Δn²/(εN)`.
    pub linear_slope: f64,
    pub sweep_half_width: f64,
    /// Spread of the normalized readings, `σ_n/N`.
    pub sigma: f64,
    pub nu: u64,
    pub total_trials: u64,
    /// `2σ/(s√ν)`, radians.
    pub delta_g: f64,
    pub delta_g_error: f64,
    pub included_in_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingResult {
    pub points: Vec<ScalingPoint>,
    pub fit: Option<FitResult>,
}

impl ScalingResult {
    pub fn exponent(&self) -> Option<(f64, f64)> {
        self.fit
            .as_ref()
            .map(|f| (f.parameters[1], f.parameter_errors[1]))
    }

    pub fn prefactor(&self) -> Option<(f64, f64)> {
        self.fit
            .as_ref()
            .map(|f| (f.parameters[0], f.parameter_errors[0]))
    }
}

/// Grid and option preconditions of [`scaling_study`].
pub fn validate_study(grid: &[f64], options: &ScalingOptions) -> Result<()> {
    if grid.iter().any(|n| !(*n > 0.0 && n.is_finite())) {
        return Err(invalid("grid", "mean photon numbers must be positive and finite"));
    }
    let mut distinct = grid.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(invalid("grid", format!("need at least 4 distinct N values, got {}", distinct.len())));
    }
    let decades = (distinct[distinct.len() - 1] / distinct[0]).log10();
    if decades < MIN_GRID_DECADES - 1e-12 {
        return Err(invalid(
            "grid",
            format!("must span at least {MIN_GRID_DECADES} decades, spans {decades:.3}"),
        ));
    }
    if !(options.sweep_fraction > 0.0 && options.sweep_fraction.is_finite()) {
        return Err(invalid("sweep_fraction", "must be positive"));
    }
    if let Some(n) = options.freeze_above_n {
        if !(n > 0.0) {
            return Err(invalid("freeze_above_n", "must be positive"));
        }
    }
    if options.target_postselected == Some(0) {
        return Err(invalid("target_postselected", "must be at least 1"));
    }
    Ok(())
}

fn half_width(
    mean_n: f64,
    policy: &VariancePolicy,
    epsilon: f64,
    options: &ScalingOptions,
) -> Result<f64> {
    let reference = match options.freeze_above_n {
        Some(limit) if mean_n > limit => limit,
        _ => mean_n,
    };
    let n_max = policy.ensemble(reference, options.quadrature_nodes)?.upper_bound();
    Ok(options.sweep_fraction * epsilon.abs() / n_max)
}

fn scaling_point(
    index: usize,
    mean_n: f64,
    policy: &VariancePolicy,
    base: &TrialConfig,
    options: &ScalingOptions,
) -> Result<ScalingPoint> {
    let ensemble = policy.ensemble(mean_n, options.quadrature_nodes)?;
    let moments = ensemble.moments();
    let params = base.params;
    let h = half_width(mean_n, policy, params.epsilon, options)?;
    let couplings: Vec<f64> = SWEEP_OFFSETS.iter().map(|k| params.g + k * h).collect();
    let point_seed = derive_seed(base.seed, index as u64);

    let rate = postselected_mean_exact(&ensemble, &params)?.postselect_rate;
    let total_trials = match options.target_postselected {
        Some(target) => (target as f64 / rate).ceil().max(1.0) as u64,
        None => base.total_trials,
    };
    let batch_at = |g: f64, j: u64| -> Result<TrialBatch> {
        run_batch(&TrialConfig {
            ensemble: ensemble.clone(),
            params: params.with_g(g),
            total_trials,
            readout_noise_std: base.readout_noise_std,
            seed: derive_seed(point_seed, j),
        })
    };

    let (slope, slope_error, center) = match options.slope_source {
        SlopeSource::Exact => {
            let shifts = couplings
                .iter()
                .map(|&g| postselected_mean_exact(&ensemble, &params.with_g(g)).map(|r| r.delta_n_normalized))
                .collect::<Result<Vec<_>>>()?;
            let fit = fit_linear(&couplings, &shifts, &[1.0; 5])?;
            // Unit weights: scale the error by the residual spread.
            let scatter = (fit.chi_square / fit.dof as f64).sqrt();
            (fit.parameters[0], fit.parameter_errors[0] * scatter, batch_at(params.g, 2)?)
        }
        SlopeSource::MonteCarlo => {
            let batches = (0..5u64)
                .into_par_iter()
                .map(|j| batch_at(couplings[j as usize], j))
                .collect::<Result<Vec<_>>>()?;
            let y: Vec<f64> = batches.iter().map(|b| b.delta_n_normalized).collect();
            let e: Vec<f64> = batches
                .iter()
                .map(|b| b.normalized_standard_error().max(f64::MIN_POSITIVE))
                .collect();
            let fit = fit_linear(&couplings, &y, &e)?;
            (fit.parameters[0], fit.parameter_errors[0], batches[2])
        }
    };

    let sigma = center.normalized_sigma();
    let nu = center.postselected_count;
    let delta_g = if slope > 0.0 {
        2.0 * sigma / (slope * (nu as f64).sqrt())
    } else {
        f64::INFINITY
    };
    // σ from ν draws has relative error ≈ 1/√(2ν).
    let rel = (1.0 / (2.0 * nu as f64) + (slope_error / slope).powi(2)).sqrt();
    Ok(ScalingPoint {
        mean_n: moments.mean_n,
        std_dn: moments.std_dn,
        slope_s: slope,
        slope_error,
        linear_slope: 2.0 * moments.variance() / (params.epsilon * moments.mean_n),
        sweep_half_width: h,
        sigma,
        nu,
        total_trials,
        delta_g,
        delta_g_error: delta_g * rel,
        included_in_fit: nu >= MIN_POSTSELECTED_FOR_FIT && delta_g.is_finite(),
    })
}

/// Runs the study over `grid` and fits `Δg ∝ N^b`. The base config supplies
/// the coupling at the sweep center, `ε`, `g_S`, readout noise, the trial
/// count per batch and the campaign seed; its ensemble is replaced per `N`.
pub fn scaling_study(
    grid: &[f64],
    policy: &VariancePolicy,
    base: &TrialConfig,
    options: &ScalingOptions,
) -> Result<ScalingResult> {
    validate_study(grid, options)?;
    base.validate()?;
    let points = grid
        .par_iter()
        .enumerate()
        .map(|(i, &n)| scaling_point(i, n, policy, base, options))
        .collect::<Result<Vec<_>>>()?;
    let kept: Vec<&ScalingPoint> = points.iter().filter(|p| p.included_in_fit).collect();
    let fit = if kept.len() >= 3 {
        let x: Vec<f64> = kept.iter().map(|p| p.mean_n).collect();
        let y: Vec<f64> = kept.iter().map(|p| p.delta_g).collect();
        let e: Vec<f64> = kept.iter().map(|p| p.delta_g_error).collect();
        Some(fit_powerlaw(&x, &y, &e)?)
    } else {
        None
    };
    Ok(ScalingResult { points, fit })
}
