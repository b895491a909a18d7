//! Weighted least-squares fitters for lines, Gaussians and power laws.
//!
//! Parameter errors are the square roots of the diagonal of `(Jᵀ W J)⁻¹`
//! with `W = diag(1/σ²)`, i.e. the supplied errors are taken as absolute.

use nalgebra::{Matrix4, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Iteration budget of the Gaussian refinement.
pub const GAUSSIAN_MAX_ITERATIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FitKind {
    Linear,
    Gaussian,
    Powerlaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub kind: FitKind,
    /// Linear: `[slope, intercept]`. Gaussian: `[amplitude, center, width,
    /// offset]`. Power law: `[prefactor, exponent]`.
    pub parameters: Vec<f64>,
    pub parameter_errors: Vec<f64>,
    /// `√χ²`.
    pub residual_norm: f64,
    pub chi_square: f64,
    pub dof: usize,
}

impl FitResult {
    pub fn reduced_chi_square(&self) -> f64 {
        self.chi_square / self.dof as f64
    }
}

fn check_inputs(x: &[f64], y: &[f64], y_errors: &[f64], n_params: usize) -> Result<()> {
    if x.len() != y.len() || x.len() != y_errors.len() {
        return Err(invalid(
            "x/y/y_errors",
            format!("lengths differ: {}, {}, {}", x.len(), y.len(), y_errors.len()),
        ));
    }
    if x.len() < n_params + 1 {
        return Err(invalid(
            "x",
            format!("need at least {} points, got {}", n_params + 1, x.len()),
        ));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(invalid("x/y", "values must be finite"));
    }
    if let Some(e) = y_errors.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
        return Err(invalid("y_errors", format!("must be positive and finite, got {e}")));
    }
    Ok(())
}

/// Straight line `y = slope·x + intercept`, solved about the weighted
/// centroid of `x`.
pub fn fit_linear(x: &[f64], y: &[f64], y_errors: &[f64]) -> Result<FitResult> {
    check_inputs(x, y, y_errors, 2)?;
    let w: Vec<f64> = y_errors.iter().map(|e| 1.0 / (e * e)).collect();
    let sw: f64 = w.iter().sum();
    let xbar = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let ybar = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..x.len() {
        let dx = x[i] - xbar;
        sxx += w[i] * dx * dx;
        sxy += w[i] * dx * (y[i] - ybar);
    }
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(sxx > sw * (scale * 1e-12).powi(2)) {
        return Err(Error::SingularFit);
    }
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let chi_square: f64 = (0..x.len())
        .map(|i| w[i] * (y[i] - slope * x[i] - intercept).powi(2))
        .sum();
    Ok(FitResult {
        kind: FitKind::Linear,
        parameters: vec![slope, intercept],
        parameter_errors: vec![(1.0 / sxx).sqrt(), (1.0 / sw + xbar * xbar / sxx).sqrt()],
        residual_norm: chi_square.sqrt(),
        chi_square,
        dof: x.len() - 2,
    })
}

/// `y = A·x^b`, fitted as a line in `(ln x, ln y)` with relative errors.
pub fn fit_powerlaw(x: &[f64], y: &[f64], y_errors: &[f64]) -> Result<FitResult> {
    check_inputs(x, y, y_errors, 2)?;
    if x.iter().chain(y).any(|v| *v <= 0.0) {
        return Err(invalid("x/y", "power-law fits need strictly positive data"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let le: Vec<f64> = y_errors.iter().zip(y).map(|(e, y)| e / y).collect();
    let line = fit_linear(&lx, &ly, &le)?;
    let prefactor = line.parameters[1].exp();
    Ok(FitResult {
        kind: FitKind::Powerlaw,
        parameters: vec![prefactor, line.parameters[0]],
        parameter_errors: vec![prefactor * line.parameter_errors[1], line.parameter_errors[0]],
        ..line
    })
}

fn gaussian(p: &Vector4<f64>, x: f64) -> (f64, Vector4<f64>) {
    let (a, c, w) = (p[0], p[1], p[2]);
    let u = (x - c) / w;
    let e = (-0.5 * u * u).exp();
    let grad = Vector4::new(e, a * e * u / w, a * e * u * u / w, 1.0);
    (a * e + p[3], grad)
}

fn gaussian_chi2(p: &Vector4<f64>, x: &[f64], y: &[f64], w: &[f64]) -> f64 {
    (0..x.len())
        .map(|i| w[i] * (y[i] - gaussian(p, x[i]).0).powi(2))
        .sum()
}

fn normal_equations(p: &Vector4<f64>, x: &[f64], y: &[f64], w: &[f64]) -> (Matrix4<f64>, Vector4<f64>) {
    let mut jtj = Matrix4::zeros();
    let mut jtr = Vector4::zeros();
    for i in 0..x.len() {
        let (f, g) = gaussian(p, x[i]);
        jtj += w[i] * g * g.transpose();
        jtr += w[i] * (y[i] - f) * g;
    }
    (jtj, jtr)
}

fn moment_guess(x: &[f64], y: &[f64]) -> Vector4<f64> {
    let (min, max) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    // A peak sits further from the mean than the baseline does.
    let (offset, amplitude) = if max - mean >= mean - min {
        (min, max - min)
    } else {
        (max, min - max)
    };
    let mass: Vec<f64> = y.iter().map(|v| ((v - offset) / amplitude).max(0.0)).collect();
    let total: f64 = mass.iter().sum();
    let center = mass.iter().zip(x).map(|(m, x)| m * x).sum::<f64>() / total;
    let var = mass.iter().zip(x).map(|(m, x)| m * (x - center).powi(2)).sum::<f64>() / total;
    let span = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - x.iter().cloned().fold(f64::INFINITY, f64::min);
    let width = if var > 0.0 { var.sqrt() } else { span / 4.0 };
    Vector4::new(amplitude, center, width.max(span * 1e-3), offset)
}

/// `y = A·exp(-(x - c)²/(2 w²)) + offset` by Levenberg–Marquardt from a
/// moment-based start. The width stays positive and the center within one
/// span of the data.
pub fn fit_gaussian(x: &[f64], y: &[f64], y_errors: &[f64]) -> Result<FitResult> {
    check_inputs(x, y, y_errors, 4)?;
    let w: Vec<f64> = y_errors.iter().map(|e| 1.0 / (e * e)).collect();
    let xmin = x.iter().cloned().fold(f64::INFINITY, f64::min);
    let xmax = x.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = xmax - xmin;
    if !(span > 0.0) {
        return Err(Error::SingularFit);
    }
    let clamp = |mut p: Vector4<f64>| {
        p[1] = p[1].clamp(xmin - span, xmax + span);
        p[2] = p[2].abs().clamp(span * 1e-6, span * 1e3);
        p
    };
    let mut p = clamp(moment_guess(x, y));
    let mut chi2 = gaussian_chi2(&p, x, y, &w);
    let mut lambda = 1e-3;
    let mut converged = false;
    for _ in 0..GAUSSIAN_MAX_ITERATIONS {
        let (jtj, jtr) = normal_equations(&p, x, y, &w);
        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..4 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = clamp(p + step);
            let trial_chi2 = gaussian_chi2(&trial, x, y, &w);
            if trial_chi2 <= chi2 {
                let small_step = (0..4).all(|k| (trial[k] - p[k]).abs() <= 1e-12 * (p[k].abs() + span * 1e-12));
                let flat = chi2 - trial_chi2 <= 1e-15 * chi2;
                p = trial;
                chi2 = trial_chi2;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                converged = small_step || flat;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: p is a minimum to working precision.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations: GAUSSIAN_MAX_ITERATIONS,
        });
    }
    let (jtj, _) = normal_equations(&p, x, y, &w);
    let cov = jtj.try_inverse().ok_or(Error::SingularFit)?;
    let errors: Vec<f64> = (0..4).map(|k| cov[(k, k)].max(0.0).sqrt()).collect();
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(Error::SingularFit);
    }
    Ok(FitResult {
        kind: FitKind::Gaussian,
        parameters: p.iter().copied().collect(),
        parameter_errors: errors,
        residual_norm: chi2.sqrt(),
        chi_square: chi2,
        dof: x.len() - 4,
    })
}
