use wvkerr_core::ensemble::{poissonian, sine_modulated_with_std};
use wvkerr_core::estimation::postselected_mean_exact;
use wvkerr_core::experiments::{
    fit_linear, scaling_study, sweep_coupling, sweep_epsilon, sweep_variance, CouplingAxis, ScalingOptions,
    VariancePolicy,
};
use wvkerr_core::quantum::im_weak_value_exact;
use wvkerr_core::{Error, InteractionParams, ProbeEnsemble, TrialConfig};

fn params(g: f64, epsilon: f64) -> InteractionParams {
    InteractionParams::new(g, 0.0, epsilon).unwrap()
}

fn modulated(mean: f64, spread: f64) -> ProbeEnsemble {
    sine_modulated_with_std(mean, spread * mean, true, 128).unwrap()
}

#[test]
fn zero_coupling_sweep_is_flat() {
    let base = TrialConfig::new(modulated(9e4, 0.5), params(0.0, 0.1), 2_000_000, 1);
    let axis = CouplingAxis::Direct { g_values: vec![0.0; 5] };
    let r = sweep_coupling(&base, &axis).unwrap();
    assert!(r.fit.is_none());
    for (y, e) in r.delta_n_normalized.iter().zip(&r.standard_errors) {
        assert!(y.abs() < 5.0 * e);
    }
}

#[test]
fn coupling_slope_matches_exact_response() {
    let ens = modulated(9e4, 0.5);
    let g_values: Vec<f64> = (0..7).map(|k| k as f64 * 1e-8).collect();
    let base = TrialConfig::new(ens.clone(), params(0.0, 0.1), 100_000_000, 2);
    let r = sweep_coupling(&base, &CouplingAxis::Direct { g_values: g_values.clone() }).unwrap();
    let fit = r.fit.unwrap();
    let exact: Vec<f64> = g_values
        .iter()
        .map(|&g| postselected_mean_exact(&ens, &params(g, 0.1)).unwrap().delta_n_normalized)
        .collect();
    let exact_slope = fit_linear(&g_values, &exact, &r.standard_errors).unwrap().parameters[0];
    let (slope, err) = (fit.parameters[0], fit.parameter_errors[0]);
    assert!((slope - exact_slope).abs() < 3.0 * err, "{slope} ± {err} vs {exact_slope}");
    let m = ens.moments();
    let linear = 2.0 * m.variance() / (0.1 * m.mean_n);
    assert!((exact_slope - linear).abs() < 0.1 * linear);
    assert!(fit.reduced_chi_square() < 3.0);
}

fn delays() -> Vec<f64> {
    (-6..=6).map(|k| k as f64 * 0.5e-12).collect()
}

#[test]
fn coherent_probe_cannot_resolve_the_delay_curve() {
    let axis = CouplingAxis::Delay {
        delays: delays(),
        g_peak: 6e-8,
        tau_c: 1e-12,
    };
    // ν ≈ 1e5 post-selections per point.
    let base = TrialConfig::new(poissonian(5e4, 1e-12).unwrap(), params(0.0, 0.1), 40_000_000, 3);
    let r = sweep_coupling(&base, &axis).unwrap();
    for (y, e) in r.delta_n_normalized.iter().zip(&r.standard_errors) {
        assert!(y.abs() < 4.0 * e);
    }
    if let Some(f) = r.fit {
        assert!(f.parameters[0].abs() < 3.0 * f.parameter_errors[0]);
    }
}

#[test]
fn modulated_probe_resolves_the_delay_curve() {
    let tau_c = 1e-12;
    let axis = CouplingAxis::Delay {
        delays: delays(),
        g_peak: 6e-8,
        tau_c,
    };
    let base = TrialConfig::new(modulated(9e4, 0.5), params(0.0, 0.1), 80_000_000, 4);
    let r = sweep_coupling(&base, &axis).unwrap();
    let f = r.fit.unwrap();
    let (amp, center, width) = (f.parameters[0], f.parameters[1], f.parameters[2]);
    let err = &f.parameter_errors;
    assert!(amp > 5.0 * err[0]);
    assert!(center.abs() < 3.0 * err[1]);
    assert!((width.abs() - tau_c).abs() < 0.2 * tau_c);
}

#[test]
fn shift_grows_with_probe_variance() {
    let (mean, g) = (5e4, 1e-8);
    let base = TrialConfig::new(modulated(mean, 0.5), params(g, 0.1), 1_000_000_000, 5);
    let r = sweep_variance(&base, &[0.15 * mean, 0.3 * mean, 0.6 * mean]).unwrap();
    let (y, e) = (&r.delta_n_normalized, &r.standard_errors);
    let ratio = y[2] / y[1];
    let ratio_err = ratio * ((e[2] / y[2]).powi(2) + (e[1] / y[1]).powi(2)).sqrt();
    assert!((ratio - 4.0).abs() < 3.0 * ratio_err, "{ratio} ± {ratio_err}");
    for (i, dn) in r.axis_values.iter().enumerate() {
        let exact = postselected_mean_exact(&sine_modulated_with_std(mean, *dn, true, 128).unwrap(), &params(g, 0.1))
            .unwrap()
            .delta_n_normalized;
        assert!((y[i] - exact).abs() < 5.0 * e[i]);
    }
}

#[test]
fn variance_sweep_recovers_coupling() {
    let (mean, g) = (5e4, 3e-8);
    let dn: Vec<f64> = [0.1, 0.25, 0.4, 0.55, 0.7].iter().map(|c| c * mean).collect();
    // ν ≈ 1e6 post-selections per point.
    let base = TrialConfig::new(modulated(mean, 0.5), params(g, 0.1), 400_000_000, 6);
    let r = sweep_variance(&base, &dn).unwrap();
    let est = r.g_estimate.unwrap();
    assert!((est.value - g).abs() < 0.05 * g, "{} ± {}", est.value, est.error);
}

#[test]
fn halving_the_offset_doubles_the_shift() {
    let base = TrialConfig::new(modulated(5e4, 0.5), params(1e-8, 0.1), 1_000_000_000, 7);
    let r = sweep_epsilon(&base, &[0.05, 0.1, 0.2]).unwrap();
    let (y, e) = (&r.delta_n_normalized, &r.standard_errors);
    for (hi, lo) in [(0, 1), (1, 2)] {
        let ratio = y[hi] / y[lo];
        let ratio_err = ratio * ((e[hi] / y[hi]).powi(2) + (e[lo] / y[lo]).powi(2)).sqrt();
        assert!((ratio - 2.0).abs() < 3.0 * ratio_err, "{ratio} ± {ratio_err}");
    }
}

#[test]
fn large_offsets_expose_the_small_angle_form() {
    let g = 6e-8;
    let eps = [0.4, 0.8, 1.2, 1.6, 2.0, 2.4];
    let base = TrialConfig::new(modulated(9e4, 0.5), params(g, 0.1), 100_000_000, 8);
    let r = sweep_epsilon(&base, &eps).unwrap();
    let inverse = r.fit.as_ref().unwrap();
    let exact = r.exact_convention_fit.as_ref().unwrap();
    // The shift vanishes with the weak value, so a faithful form needs no
    // intercept.
    assert!(exact.parameters[1].abs() < 3.0 * exact.parameter_errors[1]);
    assert!(inverse.parameters[1].abs() > 5.0 * inverse.parameter_errors[1]);
    let est = r.g_estimate_exact.unwrap();
    assert!((est.value - g).abs() < 3.0 * est.error);
    let naive = r.g_estimate.unwrap();
    assert!((naive.value - g).abs() > 3.0 * naive.error);
    assert!(im_weak_value_exact(2.4).unwrap() < 0.5 / 2.4);
}

#[test]
fn offset_sweep_without_coupling_is_flat() {
    let base = TrialConfig::new(modulated(9e4, 0.5), params(0.0, 0.1), 20_000_000, 9);
    let r = sweep_epsilon(&base, &[0.1, 0.2, 0.4, 0.8]).unwrap();
    let est = r.g_estimate.unwrap();
    assert!(est.value.abs() < 4.0 * est.error);
}

fn scaling_base(seed: u64) -> TrialConfig {
    TrialConfig::new(modulated(1e4, 0.5), params(0.0, 0.1), 10_000_000, seed)
}

#[test]
fn scaling_rejects_thin_grids() {
    let policy = VariancePolicy::Proportional { ratio: 0.5 };
    let opts = ScalingOptions::default();
    for grid in [vec![3e4, 5e4, 1e5], vec![3e4, 4e4, 5e4, 6e4]] {
        let err = scaling_study(&grid, &policy, &scaling_base(1), &opts).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { name: "grid", .. }));
    }
}

#[test]
fn scaling_exponents_separate_the_two_policies() {
    let grid = [3e4, 5e4, 7e4, 1e5];
    let opts = ScalingOptions::default();
    let hs = scaling_study(&grid, &VariancePolicy::Proportional { ratio: 0.5 }, &scaling_base(10), &opts).unwrap();
    let sql = scaling_study(&grid, &VariancePolicy::Poissonian, &scaling_base(11), &opts).unwrap();
    for p in hs.points.iter().chain(&sql.points) {
        let recomputed = 2.0 * p.sigma / (p.slope_s * (p.nu as f64).sqrt());
        assert!((p.delta_g - recomputed).abs() <= 1e-12 * recomputed);
        assert!(p.included_in_fit);
    }
    let (b_hs, e_hs) = hs.exponent().unwrap();
    let (b_sql, e_sql) = sql.exponent().unwrap();
    assert!((b_hs + 1.0).abs() < 3.0 * e_hs, "{b_hs} ± {e_hs}");
    assert!((b_sql + 0.5).abs() < 3.0 * e_sql, "{b_sql} ± {e_sql}");
    assert!(b_hs < b_sql);
}

#[test]
fn frozen_sweep_saturates_at_large_mean() {
    let grid = [3e4, 1e5, 3e5, 1e6, 5e6];
    let opts = ScalingOptions {
        freeze_above_n: Some(1e5),
        ..ScalingOptions::default()
    };
    let r = scaling_study(&grid, &VariancePolicy::Proportional { ratio: 0.5 }, &scaling_base(12), &opts).unwrap();
    let first = &r.points[0];
    let last = r.points.last().unwrap();
    assert!(first.slope_s / first.linear_slope > 0.9);
    assert!(last.slope_s / last.linear_slope < 0.9);
    assert!(r.points.iter().all(|p| p.sweep_half_width >= r.points[1].sweep_half_width));
}
