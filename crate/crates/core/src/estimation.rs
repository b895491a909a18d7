//! Post-selected probe statistics, the moment estimator of `g`, and the
//! classical and quantum information bounds.

use serde::{Deserialize, Serialize};

use crate::ensemble::{Moments, ProbeEnsemble};
use crate::error::{invalid, Error, Result};
use crate::numeric::{reduce_phase, CompensatedSum};
use crate::quantum::{im_weak_value_exact, postselect_prob, InteractionParams, SystemState};

/// Post-selection rates at or below this are treated as measure zero.
pub const MIN_POSTSELECTION_RATE: f64 = 1e-300;

/// Which value of `Im C_w` converts a shift into a coupling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeakValueConvention {
    /// `Im C_w = 1/ε`, the small-ε calibration.
    #[default]
    Inverse,
    /// `Im C_w = cot(ε/2)/2`.
    Exact,
}

impl WeakValueConvention {
    pub fn im_weak_value(self, epsilon: f64) -> Result<f64> {
        if epsilon == 0.0 {
            return Err(Error::OrthogonalPostselection { overlap: 0.0 });
        }
        match self {
            WeakValueConvention::Inverse => Ok(1.0 / epsilon),
            WeakValueConvention::Exact => im_weak_value_exact(epsilon),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShiftResult {
    pub mean_n_postselected: f64,
    /// `δn`, photons.
    pub delta_n: f64,
    /// `δñ = δn / N`.
    pub delta_n_normalized: f64,
    pub postselect_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InformationBounds {
    pub fisher_classical_per_trial: f64,
    pub qfi_per_use: f64,
    /// `1/√(qfi_per_use · uses)`.
    pub cramer_rao_dg: f64,
    /// `1/√(fisher_classical_per_trial · uses)`.
    pub classical_dg: f64,
}

/// Pointer shift `δP = 2 g ΔP² Im C_w`.
pub fn generic_pointer_shift(g: f64, delta_p: f64, im_cw: f64) -> Result<f64> {
    if !(delta_p >= 0.0) {
        return Err(invalid("delta_p", format!("must be non-negative, got {delta_p}")));
    }
    Ok(2.0 * g * delta_p * delta_p * im_cw)
}

/// `p(n) - p(0) = sin(gn/2) sin(gn/2 + ε)`, which vanishes identically at
/// `g = 0`. Reducing `gn` mod 2π flips both factors together.
fn excess_prob(n: f64, params: &InteractionParams) -> f64 {
    let half = 0.5 * reduce_phase(params.g * n);
    half.sin() * (half + params.epsilon).sin()
}

/// Exact post-selected mean photon number, summed over the ensemble with
/// the per-`n` probability `sin²((g n + ε)/2)`.
pub fn postselected_mean_exact(
    ensemble: &ProbeEnsemble,
    params: &InteractionParams,
) -> Result<ShiftResult> {
    params.validate()?;
    let points = ensemble.weighted_points();
    let mean: f64 = points.iter().map(|&(n, w)| w * n).collect::<CompensatedSum>().value();
    let base = postselect_prob(0.0, params);
    let mut excess = CompensatedSum::new();
    let mut numerator = CompensatedSum::new();
    for &(n, w) in &points {
        let dp = w * excess_prob(n, params);
        excess.add(dp);
        numerator.add((n - mean) * dp);
    }
    let rate = base + excess.value();
    if !(rate > MIN_POSTSELECTION_RATE) {
        return Err(Error::DegeneratePostselection { rate });
    }
    let delta_n = numerator.value() / rate;
    Ok(ShiftResult {
        mean_n_postselected: mean + delta_n,
        delta_n,
        delta_n_normalized: delta_n / mean,
        postselect_rate: rate.min(1.0),
    })
}

/// First-order shift `δn ≈ 2 (g/ε) Δn²`.
pub fn mean_shift_linearized(moments: &Moments, params: &InteractionParams) -> Result<f64> {
    if params.epsilon == 0.0 {
        return Err(Error::OrthogonalPostselection { overlap: 0.0 });
    }
    Ok(2.0 * params.g / params.epsilon * moments.variance())
}

/// Moment estimator `ĝ = δn / (2 Δn² Im C_w)`.
pub fn estimate_g(
    delta_n_observed: f64,
    moments: &Moments,
    epsilon: f64,
    convention: WeakValueConvention,
) -> Result<f64> {
    if moments.std_dn == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let im_cw = convention.im_weak_value(epsilon)?;
    Ok(delta_n_observed / (2.0 * moments.variance() * im_cw))
}

/// Per-trial Fisher information on `g` carried by the post-selected
/// readings. A trial that fails post-selection still counts as a use but
/// leaves no reading:
///
/// `F = P_s Var_q(∂_g ln p)`, with `q(n) ∝ ρ_nn p(n)` the post-selected
/// distribution and `∂_g ln p = n cot((gn+ε)/2)`.
///
/// At `g = 0` this is `cos²(ε/2) Δn²`, so it grows as `N²` only when the
/// spread does.
pub fn fisher_classical(ensemble: &ProbeEnsemble, params: &InteractionParams) -> Result<f64> {
    params.validate()?;
    let points = ensemble.weighted_points();
    let mut rate = CompensatedSum::new();
    let mut score = CompensatedSum::new();
    let trig: Vec<(f64, f64)> = points
        .iter()
        .map(|&(n, _)| (0.5 * reduce_phase(params.g * n + params.epsilon)).sin_cos())
        .collect();
    for (&(n, w), &(s, c)) in points.iter().zip(&trig) {
        rate.add(w * s * s);
        score.add(w * n * s * c);
    }
    let rate = rate.value();
    if !(rate > MIN_POSTSELECTION_RATE) {
        return Err(Error::DegeneratePostselection { rate });
    }
    let mean_score = score.value() / rate;
    let mut f = CompensatedSum::new();
    for (&(n, w), &(s, c)) in points.iter().zip(&trig) {
        let d = n * c - s * mean_score;
        f.add(w * d * d);
    }
    Ok(f.value().max(0.0))
}

/// Fisher information of the full outcome record {fail} ∪ {success, n},
/// `Σ ρ_nn (∂p)²/p + (∂P_s)²/(1 - P_s)`. It includes what the reading
/// reveals about the intensity itself, so it grows as `⟨n²⟩` even for a
/// Poissonian probe.
pub fn fisher_joint(ensemble: &ProbeEnsemble, params: &InteractionParams) -> Result<f64> {
    params.validate()?;
    let mut success = CompensatedSum::new();
    let mut rate = CompensatedSum::new();
    let mut d_rate = CompensatedSum::new();
    for (n, w) in ensemble.weighted_points() {
        let (s, c) = (0.5 * reduce_phase(params.g * n + params.epsilon)).sin_cos();
        success.add(w * n * n * c * c);
        rate.add(w * s * s);
        d_rate.add(w * n * s * c);
    }
    let fail = 1.0 - rate.value();
    let failure_term = if fail > 0.0 {
        d_rate.value().powi(2) / fail
    } else {
        0.0
    };
    Ok(success.value() + failure_term)
}

/// `Var(n̂ Ĉ)` for a coherent probe of mean `N` and system state `pre`.
pub fn qfi_pure(mean_n: f64, pre: &SystemState) -> Result<f64> {
    if !(mean_n > 0.0 && mean_n.is_finite()) {
        return Err(invalid("mean_n", format!("must be positive and finite, got {mean_n}")));
    }
    let c = pre.which_path_expectation();
    Ok(mean_n * mean_n * c * (1.0 - c) + mean_n * c)
}

/// Convexity bound on the QFI of the mixed probe: the ensemble average of
/// the pure-state QFI of its members. Members of a pmf are photon-number
/// states; members of a shot-noise modulated ensemble are coherent pulses.
pub fn qfi_mixed_bound(ensemble: &ProbeEnsemble, pre: &SystemState) -> f64 {
    let c = pre.which_path_expectation();
    let spread = c * (1.0 - c);
    match ensemble {
        ProbeEnsemble::ModulatedContinuous(m) if m.shot_noise => m
            .intensity_nodes()
            .into_iter()
            .map(|(l, w)| w * (l * l * spread + l * c))
            .collect::<CompensatedSum>()
            .value(),
        _ => ensemble.expect(|n| n * n * spread),
    }
}

/// `Δg_min = 1/√(F ν̃)`.
pub fn cramer_rao_bound(fisher: f64, uses: u64) -> Result<f64> {
    if !(fisher > 0.0) || !fisher.is_finite() {
        return Err(Error::NonpositiveInformation { fisher });
    }
    if uses == 0 {
        return Err(invalid("uses", "must be at least 1"));
    }
    Ok(1.0 / (fisher * uses as f64).sqrt())
}

/// Classical and quantum bounds for `uses` independent interactions.
pub fn information_bounds(
    ensemble: &ProbeEnsemble,
    params: &InteractionParams,
    pre: &SystemState,
    uses: u64,
) -> Result<InformationBounds> {
    let fisher = fisher_classical(ensemble, params)?;
    let qfi = qfi_pure(ensemble.mean_n(), pre)?;
    Ok(InformationBounds {
        fisher_classical_per_trial: fisher,
        qfi_per_use: qfi,
        cramer_rao_dg: cramer_rao_bound(qfi, uses)?,
        classical_dg: cramer_rao_bound(fisher, uses)?,
    })
}
