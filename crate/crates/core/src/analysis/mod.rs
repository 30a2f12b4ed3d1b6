//! Closed-loop models of the adaptive loop and the empirical checks built on
//! them: the nominal ("good") model, the crude one-step model, the
//! perturbation decomposition and its stacked form, transition-matrix decay,
//! convolution-bound fitting, and drift budgets.
//!
//! Everything here is a pure function of a finished trace plus the plant.

pub mod bound;
pub mod crude;
pub mod decay;
pub mod decomposition;
pub mod drift;
pub mod extended;
pub mod good;
pub mod suite;

use nalgebra::DMatrix;

pub use bound::{
    bound_violations, fit_convolution_bound, l2_tracking_check, BoundFit, BoundViolation, DecayRun,
    L2Report,
};
pub use crude::{build_crude_model, crude_model_residual, CrudeModel};
pub use decay::{transition_decay, transition_decay_from_trace, DecayFit};
pub use decomposition::{
    decompose_error, DecompositionContext, DecompositionSlacks, ErrorDecomposition,
};
pub use drift::{drift_budget, DriftReport};
pub use extended::ExtendedSystem;
pub use good::{build_good_model, good_model_residual, GoodModel};
pub use suite::{verify_trace, CheckResult, CheckStatus, VerifyOptions, VerifyReport};

/// Induced 2-norm.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

/// Residual check scale: `1 + magnitude`.
pub(crate) fn rel(residual: f64, magnitude: f64) -> f64 {
    residual / (1.0 + magnitude)
}
