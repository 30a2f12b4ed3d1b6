use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::TimeVaryingPlant;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DriftReport {
    /// `sum_{t=t1}^{t2-1} ||theta*(t+1) - theta*(t)||`.
    pub total_variation: f64,
    pub max_increment: f64,
    /// Smallest `c_0` with `TV(s1, s2) <= c_0 + eps (s2 - s1)` on every
    /// sub-window of `[t1, t2]`.
    pub required_c0: f64,
    pub fits: bool,
}

/// Total variation of the predictor parameters over `[t1, t2]` and whether
/// it fits the affine budget `c_0 + eps (s2 - s1)` on every sub-window.
pub fn drift_budget(
    plant: &TimeVaryingPlant,
    t1: i64,
    t2: i64,
    c0: f64,
    eps: f64,
) -> Result<DriftReport> {
    if t2 <= t1 {
        return Err(Error::Invalid(format!(
            "drift window needs t2 > t1, got [{t1}, {t2}]"
        )));
    }
    let mut prev = plant.theta_star(t1)?.to_vector();
    let mut total_variation = 0.0;
    let mut max_increment: f64 = 0.0;
    // Kadane over inc_t - eps gives the worst sub-window excess.
    let (mut run, mut worst) = (0.0f64, 0.0f64);
    for t in t1..t2 {
        let next = plant.theta_star(t + 1)?.to_vector();
        let inc = (&next - &prev).norm();
        total_variation += inc;
        max_increment = max_increment.max(inc);
        run = (run + inc - eps).max(0.0);
        worst = worst.max(run);
        prev = next;
    }
    Ok(DriftReport {
        total_variation,
        max_increment,
        required_c0: worst,
        fits: worst <= c0,
    })
}
