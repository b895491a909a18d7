//! Two-path single-photon algebra: pre- and post-selected states, the
//! XPM + SPM evolution, weak values and post-selection probabilities.
//!
//! The which-path observable is the projector onto `|1⟩`, the arm that
//! overlaps the probe pulse.

use std::f64::consts::FRAC_1_SQRT_2;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numeric::reduce_phase;

pub use num_complex::Complex64 as Complex;

/// Overlaps at or below this modulus are treated as orthogonal.
pub const ORTHOGONALITY_THRESHOLD: f64 = 1e-15;

/// Pure state of the system photon over the which-path basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemState {
    /// Coefficient of `|0⟩`, the non-interacting path.
    pub amp0: Complex,
    /// Coefficient of `|1⟩`, the interacting path.
    pub amp1: Complex,
}

impl SystemState {
    pub fn new(amp0: Complex, amp1: Complex) -> Self {
        Self { amp0, amp1 }
    }

    pub fn basis0() -> Self {
        Self::new(Complex::new(1.0, 0.0), Complex::new(0.0, 0.0))
    }

    pub fn basis1() -> Self {
        Self::new(Complex::new(0.0, 0.0), Complex::new(1.0, 0.0))
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp0.norm_sqr() + self.amp1.norm_sqr()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm_sqr().sqrt();
        Self::new(self.amp0 / n, self.amp1 / n)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &SystemState) -> Complex {
        self.amp0.conj() * other.amp0 + self.amp1.conj() * other.amp1
    }

    /// `⟨Ĉ⟩`, the probability of the interacting path.
    pub fn which_path_expectation(&self) -> f64 {
        self.amp1.norm_sqr() / self.norm_sqr()
    }
}

/// Couplings of `U = exp(-i g_S n² - i g Ĉ n)` and the post-selection offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InteractionParams {
    /// XPM coupling, radians per photon.
    pub g: f64,
    /// SPM coupling, radians per photon².
    pub g_spm: f64,
    /// Post-selection offset, radians.
    pub epsilon: f64,
}

impl InteractionParams {
    pub fn new(g: f64, g_spm: f64, epsilon: f64) -> Result<Self> {
        let params = Self { g, g_spm, epsilon };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.g.is_finite() {
            return Err(invalid("g", format!("must be finite, got {}", self.g)));
        }
        if !self.g_spm.is_finite() {
            return Err(invalid("g_spm", format!("must be finite, got {}", self.g_spm)));
        }
        if !self.epsilon.is_finite() {
            return Err(invalid("epsilon", format!("must be finite, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn with_g(self, g: f64) -> Self {
        Self { g, ..self }
    }

    pub fn with_epsilon(self, epsilon: f64) -> Self {
        Self { epsilon, ..self }
    }

    pub fn with_g_spm(self, g_spm: f64) -> Self {
        Self { g_spm, ..self }
    }

    fn require_nonorthogonal(&self) -> Result<()> {
        if self.epsilon == 0.0 {
            return Err(Error::OrthogonalPostselection { overlap: 0.0 });
        }
        Ok(())
    }
}

/// `|ψ⟩ = (|1⟩ + |0⟩)/√2`.
pub fn make_preselection() -> SystemState {
    SystemState::new(
        Complex::new(FRAC_1_SQRT_2, 0.0),
        Complex::new(FRAC_1_SQRT_2, 0.0),
    )
}

/// `|φ⟩ = (|1⟩ - e^{-iε}|0⟩)/√2`, returned with the global phase `e^{iε/2}`
/// so that both amplitudes are mirror images of each other. The overlap with
/// [`make_preselection`] then has an exactly vanishing real part and keeps
/// full relative precision as `ε → 0`.
pub fn make_postselection(epsilon: f64) -> SystemState {
    let half = 0.5 * epsilon;
    let (s, c) = half.sin_cos();
    SystemState::new(
        Complex::new(-c * FRAC_1_SQRT_2, s * FRAC_1_SQRT_2),
        Complex::new(c * FRAC_1_SQRT_2, s * FRAC_1_SQRT_2),
    )
}

/// `C_w = ⟨φ|Ĉ|ψ⟩ / ⟨φ|ψ⟩` with `Ĉ = |1⟩⟨1|`.
pub fn weak_value(pre: &SystemState, post: &SystemState) -> Result<Complex> {
    let overlap = post.inner(pre);
    if overlap.norm() <= ORTHOGONALITY_THRESHOLD {
        return Err(Error::OrthogonalPostselection {
            overlap: overlap.norm(),
        });
    }
    let numerator = post.amp1.conj() * pre.amp1;
    Ok(numerator / overlap)
}

/// Applies `U(n)` for a probe holding `n` photons.
pub fn evolve(state: &SystemState, n: u64, params: &InteractionParams) -> SystemState {
    let n = n as f64;
    let spm = reduce_phase(params.g_spm * n * n);
    let xpm = reduce_phase(params.g * n);
    let common = Complex::cis(-spm);
    SystemState::new(
        state.amp0 * common,
        state.amp1 * common * Complex::cis(-xpm),
    )
}

/// Exact post-selection probability `sin²((g·n + ε)/2)` for a real-valued
/// probe intensity. The SPM phase is common to both paths and never enters.
pub fn postselect_prob(intensity: f64, params: &InteractionParams) -> f64 {
    let half = 0.5 * reduce_phase(params.g * intensity + params.epsilon);
    let s = half.sin();
    s * s
}

/// `|⟨φ|U(n)|ψ⟩|²` for an integer photon count.
pub fn postselect_prob_exact(n: u64, params: &InteractionParams) -> f64 {
    postselect_prob(n as f64, params)
}

/// First-order post-selection probability
/// `|⟨φ|ψ⟩|² (1 + 2 g n Im C_w)`. Only meaningful while `n g / ε ≪ 1`.
pub fn postselect_prob_linearized(n: u64, params: &InteractionParams) -> Result<f64> {
    params.require_nonorthogonal()?;
    let pre = make_preselection();
    let post = make_postselection(params.epsilon);
    let cw = weak_value(&pre, &post)?;
    // |⟨φ|ψ⟩|² = sin²(ε/2), evaluated as on the exact path.
    let base = postselect_prob(0.0, params);
    Ok(base * (1.0 + 2.0 * params.g * n as f64 * cw.im))
}

/// Closed form `Im C_w = cot(ε/2)/2` for the protocol's state pair.
pub fn im_weak_value_exact(epsilon: f64) -> Result<f64> {
    if epsilon == 0.0 {
        return Err(Error::OrthogonalPostselection { overlap: 0.0 });
    }
    let half = 0.5 * epsilon;
    Ok(0.5 * half.cos() / half.sin())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn params(g: f64, g_spm: f64, epsilon: f64) -> InteractionParams {
        InteractionParams::new(g, g_spm, epsilon).unwrap()
    }

    #[test]
    fn preselection_is_equal_superposition() {
        let psi = make_preselection();
        assert_eq!(psi.amp0, Complex::new(0.7071067811865476, 0.0));
        assert_eq!(psi.amp1, Complex::new(0.7071067811865476, 0.0));
        assert!((psi.norm_sqr() - 1.0).abs() < 1e-15);
        assert!((psi.which_path_expectation() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn postselection_at_zero_is_orthogonal() {
        let phi = make_postselection(0.0);
        assert!((phi.amp0.re + FRAC_1_SQRT_2).abs() < 1e-16);
        assert!((phi.amp1.re - FRAC_1_SQRT_2).abs() < 1e-16);
        assert_eq!(phi.inner(&make_preselection()).norm(), 0.0);
    }

    #[test]
    fn postselection_at_pi_coincides_with_preselection() {
        let overlap = make_postselection(PI).inner(&make_preselection()).norm_sqr();
        assert!((overlap - 1.0).abs() < 1e-15);
    }

    #[test]
    fn postselection_overlap_at_small_offset() {
        let overlap = make_postselection(0.1).inner(&make_preselection()).norm_sqr();
        // |1 - e^{iε}|²/4 evaluated by hand.
        let direct = (Complex::new(1.0, 0.0) - Complex::cis(0.1)).norm_sqr() / 4.0;
        assert!((overlap - direct).abs() < 1e-15);
        assert!((overlap - 2.497_917_360_987_117e-3).abs() < 1e-17);
    }

    #[test]
    fn weak_value_at_tenth_of_radian() {
        let cw = weak_value(&make_preselection(), &make_postselection(0.1)).unwrap();
        assert!((cw.re - 0.5).abs() < 1e-12);
        assert!((cw.im - 9.991_665_277_447_007).abs() < 1e-12);
    }

    #[test]
    fn weak_value_approaches_inverse_offset() {
        for eps in [1e-1, 1e-2, 1e-3, 1e-5] {
            let cw = weak_value(&make_preselection(), &make_postselection(eps)).unwrap();
            assert!((eps * cw.im - 1.0).abs() < eps * eps / 10.0);
        }
    }

    #[test]
    fn weak_value_without_postselection() {
        let psi = make_preselection();
        let cw = weak_value(&psi, &psi).unwrap();
        assert!((cw - Complex::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn weak_value_rejects_orthogonal_pair() {
        let err = weak_value(&make_preselection(), &make_postselection(0.0)).unwrap_err();
        assert!(matches!(err, Error::OrthogonalPostselection { .. }));
    }

    #[test]
    fn evolve_identity_at_zero_photons() {
        let psi = make_preselection();
        let out = evolve(&psi, 0, &params(0.3, 0.7, 0.1));
        assert_eq!(out, psi);
    }

    #[test]
    fn evolve_half_period_flips_interacting_arm() {
        let n = 1000;
        let out = evolve(&make_preselection(), n, &params(PI / n as f64, 0.0, 0.1));
        assert!((out.amp1 + Complex::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-12);
        assert!((out.amp0 - Complex::new(FRAC_1_SQRT_2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn exact_probability_values() {
        let p = postselect_prob_exact(0, &params(1e-3, 0.0, 0.1));
        assert!((p - (0.05f64).sin().powi(2)).abs() < 1e-18);
        // g·n = -ε: complete destructive interference.
        assert_eq!(postselect_prob_exact(100, &params(-1e-3, 0.0, 0.1)), 0.0);
    }

    #[test]
    fn exact_probability_ignores_spm_bitwise() {
        let base = postselect_prob_exact(123_456, &params(6e-8, 0.0, 0.1));
        for g_spm in [0.1, 1.0, 10.0] {
            let p = postselect_prob_exact(123_456, &params(6e-8, g_spm, 0.1));
            assert_eq!(p.to_bits(), base.to_bits());
        }
    }

    #[test]
    fn linearized_matches_exact_at_zero_coupling() {
        let prm = params(0.0, 0.0, 0.1);
        let lin = postselect_prob_linearized(5000, &prm).unwrap();
        let exact = postselect_prob_exact(5000, &prm);
        assert!((lin - exact).abs() < 1e-17);
    }

    #[test]
    fn linearized_close_in_validity_regime() {
        // n·g/ε = 0.01 at ε = 0.1.
        let n = 10_000;
        let prm = params(1e-7, 0.0, 0.1);
        let lin = postselect_prob_linearized(n, &prm).unwrap();
        let exact = postselect_prob_exact(n, &prm);
        assert!(((lin - exact) / exact).abs() < 1e-3);
    }

    #[test]
    fn negative_offset_suppresses_bright_pulses() {
        let prm = params(1e-7, 0.0, -0.1);
        let dim = postselect_prob_linearized(100, &prm).unwrap();
        let bright = postselect_prob_linearized(10_000, &prm).unwrap();
        assert!(bright < dim);
    }

    #[test]
    fn linearized_requires_nonzero_offset() {
        let err = postselect_prob_linearized(10, &params(1e-7, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, Error::OrthogonalPostselection { .. }));
    }

    #[test]
    fn params_reject_non_finite() {
        assert!(InteractionParams::new(f64::NAN, 0.0, 0.1).is_err());
        assert!(InteractionParams::new(0.0, f64::INFINITY, 0.1).is_err());
    }
}
