use proptest::prelude::*;

use wvkerr_core::ensemble::{from_pmf, poissonian, sine_modulated, sine_modulated_with_std};
use wvkerr_core::estimation::{
    estimate_g, fisher_classical, mean_shift_linearized, postselected_mean_exact, WeakValueConvention,
};
use wvkerr_core::quantum::{
    evolve, make_postselection, make_preselection, postselect_prob_exact, postselect_prob_linearized,
    weak_value,
};
use wvkerr_core::{Complex, InteractionParams, SystemState};

fn params(g: f64, g_spm: f64, epsilon: f64) -> InteractionParams {
    InteractionParams::new(g, g_spm, epsilon).unwrap()
}

proptest! {
    #[test]
    fn exact_probability_is_a_sine_square(
        n in 0u64..2000,
        phase in -4.0 * std::f64::consts::PI..4.0 * std::f64::consts::PI,
        eps in -std::f64::consts::PI..std::f64::consts::PI,
    ) {
        let g = if n == 0 { 0.0 } else { phase / n as f64 };
        let p = postselect_prob_exact(n, &params(g, 0.0, eps));
        prop_assert!((0.0..=1.0).contains(&p));
        let direct = ((g * n as f64 + eps) / 2.0).sin().powi(2);
        prop_assert!((p - direct).abs() <= 1e-14);
    }

    #[test]
    fn self_phase_never_changes_the_probability(
        n in 0u64..10_000_000,
        g in -1e-6f64..1e-6,
        eps in -3.0f64..3.0,
        g_spm in -10.0f64..10.0,
    ) {
        let reference = postselect_prob_exact(n, &params(g, 0.0, eps));
        prop_assert_eq!(postselect_prob_exact(n, &params(g, g_spm, eps)).to_bits(), reference.to_bits());
    }

    #[test]
    fn weak_value_closed_form(eps in 1e-6f64..std::f64::consts::PI - 1e-6) {
        let cw = weak_value(&make_preselection(), &make_postselection(eps)).unwrap();
        let half = eps / 2.0;
        let expected = Complex::new(0.5, 0.5 * half.cos() / half.sin());
        prop_assert!((cw - expected).norm() <= 1e-12 * expected.norm());
    }

    #[test]
    fn linearization_error_bound(
        n in 1u64..100_000,
        ratio in -0.3f64..0.3,
        eps in 0.01f64..0.5,
    ) {
        // ratio = n g / ε
        let g = ratio * eps / n as f64;
        let p = params(g, 0.0, eps);
        let exact = postselect_prob_exact(n, &p);
        let lin = postselect_prob_linearized(n, &p).unwrap();
        let x = g * n as f64;
        // Leading term is r²/(1 + r)², which exceeds r² once the coupling
        // opposes the offset.
        let leading = (ratio * ratio).max((ratio / (1.0 + ratio)).powi(2));
        prop_assert!((lin - exact).abs() / exact <= leading + (x + eps).powi(2));
    }

    #[test]
    fn evolution_is_unitary(
        re0 in -1.0f64..1.0, im0 in -1.0f64..1.0, re1 in -1.0f64..1.0, im1 in -1.0f64..1.0,
        n in 0u64..10_000_000,
        g in -1.0f64..1.0,
        g_spm in -10.0f64..10.0,
    ) {
        prop_assume!(re0.abs() + im0.abs() + re1.abs() + im1.abs() > 1e-3);
        let state = SystemState::new(Complex::new(re0, im0), Complex::new(re1, im1)).normalized();
        let out = evolve(&state, n, &params(g, g_spm, 0.1));
        prop_assert!((out.norm_sqr() - 1.0).abs() <= 1e-14);
        prop_assert!((out.amp0.norm() - state.amp0.norm()).abs() <= 1e-14);
    }

    #[test]
    fn pmf_constructors_are_normalized(weights in prop::collection::vec((0u64..1000, 0.0f64..10.0), 1..40)) {
        prop_assume!(weights.iter().any(|w| w.1 > 0.0));
        let ens = from_pmf(weights).unwrap();
        let total: f64 = ens.weighted_points().iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn poissonian_moments_and_mass(mean in 1.0f64..2e5) {
        let ens = poissonian(mean, 1e-9).unwrap();
        let total: f64 = ens.weighted_points().iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        let m = ens.moments();
        prop_assert!((m.mean_n - mean).abs() <= 1e-6 * mean);
        prop_assert!((m.std_dn - mean.sqrt()).abs() <= 1e-4 * mean.sqrt());
    }

    #[test]
    fn modulated_variance_identity(
        depth_step in 0usize..=10,
        log_n in 2.0f64..6.0,
        shot in any::<bool>(),
    ) {
        let n = 10f64.powf(log_n);
        let depth = depth_step as f64 / 10.0;
        let ens = sine_modulated(n, depth, shot, 64).unwrap();
        let total: f64 = ens.weighted_points().iter().map(|p| p.1).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        let expected = n * n * depth * depth / 2.0 + if shot { n } else { 0.0 };
        let m = ens.moments();
        prop_assert!((m.mean_n - n).abs() <= 1e-9 * n);
        if expected > 0.0 {
            prop_assert!((m.variance() - expected).abs() <= 1e-6 * expected);
        } else {
            prop_assert!(m.std_dn <= 1e-6 * n);
        }
    }

    #[test]
    fn postselected_mean_ignores_self_phase(
        g in -1e-6f64..1e-6,
        eps in 0.01f64..1.0,
        g_spm_index in 0usize..4,
    ) {
        let g_spm = [0.0, 0.1, 1.0, 10.0][g_spm_index];
        let ens = sine_modulated_with_std(5e4, 2e4, true, 64).unwrap();
        let a = postselected_mean_exact(&ens, &params(g, 0.0, eps)).unwrap();
        let b = postselected_mean_exact(&ens, &params(g, g_spm, eps)).unwrap();
        prop_assert_eq!(a, b);
        let fa = fisher_classical(&ens, &params(g, 0.0, eps)).unwrap();
        let fb = fisher_classical(&ens, &params(g, g_spm, eps)).unwrap();
        prop_assert_eq!(fa.to_bits(), fb.to_bits());
    }

    #[test]
    fn zero_coupling_rate(eps in -3.0f64..3.0) {
        prop_assume!(eps.abs() > 1e-3);
        let ens = poissonian(300.0, 1e-9).unwrap();
        let r = postselected_mean_exact(&ens, &params(0.0, 0.0, eps)).unwrap();
        prop_assert_eq!(r.postselect_rate, (eps / 2.0).sin().powi(2));
        prop_assert_eq!(r.delta_n, 0.0);
    }

    #[test]
    fn first_order_rate_response(
        log_n in 3.0f64..5.0,
        ratio in 0.001f64..0.05,
        eps in 0.05f64..0.3,
    ) {
        let n = 10f64.powf(log_n);
        let ens = sine_modulated_with_std(n, 0.4 * n, true, 64).unwrap();
        let n_max = ens.upper_bound();
        let g = ratio * eps / n_max;
        let rate = postselected_mean_exact(&ens, &params(g, 0.0, eps)).unwrap().postselect_rate;
        let half = eps / 2.0;
        let im_cw = 0.5 * half.cos() / half.sin();
        let first_order = half.sin().powi(2) * (1.0 + 2.0 * g * im_cw * n);
        let bound = ratio * ratio + (n_max * g + eps).powi(2);
        prop_assert!((rate - first_order).abs() / first_order <= bound);
    }

    #[test]
    fn first_order_shift_agreement(
        log_n in 3.0f64..6.0,
        spread in 0.1f64..0.7,
        ratio in 1e-4f64..0.05,
        eps in 0.05f64..0.3,
    ) {
        let n = 10f64.powf(log_n);
        prop_assume!(spread * n > n.sqrt() * 1.01);
        let ens = sine_modulated_with_std(n, spread * n, true, 64).unwrap();
        let n_max = ens.upper_bound();
        let g = ratio * eps / n_max;
        let p = params(g, 0.0, eps);
        let exact = postselected_mean_exact(&ens, &p).unwrap().delta_n;
        let lin = mean_shift_linearized(&ens.moments(), &p).unwrap();
        let bound = 2.0 * (ratio + (n_max * g + eps).powi(2));
        prop_assert!((lin - exact).abs() / exact.abs() <= bound);
    }

    #[test]
    fn estimator_round_trip(
        log_g in -9.0f64..-6.0,
        eps in 0.05f64..0.3,
        spread in 0.1f64..0.7,
        log_n in 3.0f64..6.0,
    ) {
        let n = 10f64.powf(log_n);
        let g = 10f64.powf(log_g);
        prop_assume!(spread * n > n.sqrt() * 1.01);
        let ens = sine_modulated_with_std(n, spread * n, true, 64).unwrap();
        // Validity regime: the largest probe phase stays well below ε.
        prop_assume!(ens.upper_bound() * g / eps <= 2e-3);
        let shift = postselected_mean_exact(&ens, &params(g, 0.0, eps)).unwrap();
        let ghat = estimate_g(shift.delta_n, &ens.moments(), eps, WeakValueConvention::Inverse).unwrap();
        prop_assert!((ghat - g).abs() <= 0.01 * g);
    }
}
