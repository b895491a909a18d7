//! Campaigns built from Monte Carlo batches, and the fitters they use.

pub mod fit;
pub mod scaling;
pub mod sweeps;

pub use fit::{fit_gaussian, fit_linear, fit_powerlaw, FitKind, FitResult};
pub use scaling::{scaling_study, validate_study, ScalingOptions, ScalingPoint, ScalingResult, SlopeSource, VariancePolicy};
pub use sweeps::{sweep_coupling, sweep_epsilon, sweep_variance, CouplingAxis, Estimate, SweepResult};
