//! d-step-ahead adaptive tracking control with a projection estimator.
//!
//! The crate covers the plant and predictor representations, the parameter
//! box and its projection, the estimator, the certainty-equivalence control
//! law, and closed-loop diagnostics that decompose the adaptive loop into a
//! nominal linear part plus structured perturbations.

pub mod analysis;
pub mod controller;
pub mod error;
pub mod estimator;
pub mod model;
pub mod poly;

pub use error::{Error, Result};
