//! Simulation engine for estimating a single-photon cross-phase (Kerr)
//! coupling from the post-selected shift of a classical probe's photon
//! number.

pub mod ensemble;
pub mod error;
pub mod estimation;
pub mod experiments;
pub mod montecarlo;
pub mod numeric;
pub mod quantum;

pub use ensemble::{Moments, ProbeEnsemble};
pub use error::{Error, Result};
pub use estimation::{InformationBounds, ShiftResult, WeakValueConvention};
pub use experiments::{FitResult, ScalingPoint, SweepResult};
pub use montecarlo::{TrialBatch, TrialConfig};
pub use quantum::{Complex, InteractionParams, SystemState};
