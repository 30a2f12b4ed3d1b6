//! Ideal projection estimator with the deadzone gate and box projection.

use std::fmt;

use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::controller::trace::SimulationTrace;
use crate::error::{Error, Result};
use crate::model::ParameterBox;

/// Deadzone width `delta` in `(0, inf]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Deadzone {
    Finite(f64),
    #[default]
    Infinite,
}

impl Deadzone {
    pub fn new(delta: f64) -> Result<Self> {
        if delta.is_infinite() && delta > 0.0 {
            Ok(Deadzone::Infinite)
        } else if delta > 0.0 {
            Ok(Deadzone::Finite(delta))
        } else {
            Err(Error::Invalid(format!(
                "deadzone delta must be positive, got {delta}"
            )))
        }
    }

    pub fn value(&self) -> f64 {
        match self {
            Deadzone::Finite(d) => *d,
            Deadzone::Infinite => f64::INFINITY,
        }
    }
}

impl fmt::Display for Deadzone {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Deadzone::Finite(d) => write!(f, "{d}"),
            Deadzone::Infinite => write!(f, "inf"),
        }
    }
}

// JSON has no infinity, so the unbounded deadzone is the string "inf".
impl Serialize for Deadzone {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Deadzone::Finite(d) => s.serialize_f64(*d),
            Deadzone::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Deadzone {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(de)? {
            Raw::Num(x) => Deadzone::new(x).map_err(serde::de::Error::custom),
            Raw::Text(s) if matches!(s.as_str(), "inf" | "infinity" | "Infinity") => {
                Ok(Deadzone::Infinite)
            }
            Raw::Text(s) => Err(serde::de::Error::custom(format!(
                "bad deadzone value {s:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub delta: Deadzone,
    pub param_box: ParameterBox,
    theta0: DVector<f64>,
    /// Updates are skipped when `||phi||` does not exceed this floor. Zero
    /// gives the ideal algorithm.
    pub min_phi_norm: f64,
}

impl EstimatorConfig {
    /// `theta0` is projected into the box.
    pub fn new(param_box: ParameterBox, theta0: DVector<f64>) -> Result<Self> {
        let theta0 = param_box.project(&theta0)?;
        Ok(Self {
            delta: Deadzone::Infinite,
            param_box,
            theta0,
            min_phi_norm: 0.0,
        })
    }

    pub fn with_delta(mut self, delta: Deadzone) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_min_phi_norm(mut self, floor: f64) -> Self {
        self.min_phi_norm = floor.max(0.0);
        self
    }

    pub fn theta0(&self) -> &DVector<f64> {
        &self.theta0
    }

    pub fn dim(&self) -> usize {
        self.param_box.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorStep {
    pub e: f64,
    pub rho: u8,
    /// `rho |e| / ||phi||`, zero when gated off.
    pub nu: f64,
    pub theta_check: DVector<f64>,
    pub theta_hat: DVector<f64>,
}

/// `e = y_next - phi^T theta_hat`.
pub fn prediction_error(phi: &DVector<f64>, theta_hat: &DVector<f64>, y_next: f64) -> f64 {
    y_next - phi.dot(theta_hat)
}

/// `1` iff `|e| < (2 ||S|| + delta) ||phi||`; with `delta = inf` this is `phi != 0`.
pub fn deadzone_gate(phi: &DVector<f64>, e: f64, cfg: &EstimatorConfig) -> u8 {
    let phi_norm = phi.norm();
    let open = match cfg.delta {
        Deadzone::Infinite => phi_norm > 0.0,
        Deadzone::Finite(delta) => e.abs() < (2.0 * cfg.param_box.norm() + delta) * phi_norm,
    };
    u8::from(open)
}

#[derive(Debug, Clone)]
pub struct ProjectionEstimator {
    cfg: EstimatorConfig,
    theta_hat: DVector<f64>,
}

impl ProjectionEstimator {
    pub fn new(cfg: EstimatorConfig) -> Self {
        let theta_hat = cfg.theta0.clone();
        Self { cfg, theta_hat }
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    /// One update from `phi = phi(t-d+1)` and the new measurement `y(t+1)`.
    pub fn update(&mut self, phi: &DVector<f64>, y_next: f64) -> Result<EstimatorStep> {
        if phi.len() != self.theta_hat.len() {
            return Err(Error::DimensionMismatch {
                expected: self.theta_hat.len(),
                got: phi.len(),
            });
        }
        let e = prediction_error(phi, &self.theta_hat, y_next);
        let phi_norm = phi.norm();
        let gate = deadzone_gate(phi, e, &self.cfg);
        let rho = if phi_norm > self.cfg.min_phi_norm {
            gate
        } else {
            0
        };
        let (theta_check, nu) = if rho == 1 {
            // Two divisions by the norm keep tiny regressors from underflowing.
            let step = (phi / phi_norm) * (e / phi_norm);
            (&self.theta_hat + step, e.abs() / phi_norm)
        } else {
            (self.theta_hat.clone(), 0.0)
        };
        let theta_hat = self.cfg.param_box.project(&theta_check)?;
        self.theta_hat = theta_hat.clone();
        Ok(EstimatorStep {
            e,
            rho,
            nu,
            theta_check,
            theta_hat,
        })
    }
}

/// `V = ||theta_hat - theta*||^2`.
pub fn lyapunov(theta_hat: &DVector<f64>, theta_star: &DVector<f64>) -> f64 {
    (theta_hat - theta_star).norm_squared()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorBoundsViolation {
    pub t: i64,
    pub check: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorBoundsReport {
    /// Minimum of `rhs - lhs` for the step-size bound.
    pub step_worst_slack: f64,
    /// Minimum of `rhs - lhs` for the telescoped Lyapunov bound.
    pub lyapunov_worst_slack: f64,
    /// Running maximum of `sum nu^2`.
    pub nu_sq_sum: f64,
    pub v0: f64,
    pub steps: usize,
    /// Steps with `0 < ||phi|| < 10 eps`, reported but never failed.
    pub near_degenerate: Vec<i64>,
    pub violations: Vec<EstimatorBoundsViolation>,
}

impl EstimatorBoundsReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the per-step bound `||theta(t) - theta(t-1)|| <= rho |e| / ||phi||`
/// and the telescoped Lyapunov inequality along a trace of a time-invariant
/// plant with predictor parameters `theta_star`.
///
/// The disturbance term uses `y(t) - phi(t-d)^T theta*`, which is the
/// predictor-form disturbance whether or not the initial history was
/// generated by the plant. `tol` is per step and accumulates.
pub fn verify_estimator_bounds(
    trace: &SimulationTrace,
    theta_star: &DVector<f64>,
    tol: f64,
) -> Result<EstimatorBoundsReport> {
    let d = trace.d() as i64;
    let v0 = lyapunov(trace.theta0(), theta_star);
    let mut running = v0;
    let mut report = EstimatorBoundsReport {
        step_worst_slack: f64::INFINITY,
        lyapunov_worst_slack: f64::INFINITY,
        nu_sq_sum: 0.0,
        v0,
        steps: 0,
        near_degenerate: Vec::new(),
        violations: Vec::new(),
    };
    let degenerate_floor = 10.0 * f64::EPSILON;
    for (k, rec) in trace.records().iter().enumerate() {
        let t = rec.t;
        let phi = trace.phi(t - d)?;
        let phi_norm = phi.norm();
        let prev = trace.theta_hat(t - 1)?;
        let moved = (&rec.theta_hat - prev).norm();
        let near_degenerate = phi_norm > 0.0 && phi_norm < degenerate_floor;
        if near_degenerate {
            report.near_degenerate.push(t);
        }

        let step_rhs = if rec.rho == 1 && phi_norm > 0.0 {
            rec.e.abs() / phi_norm
        } else {
            0.0
        };
        let step_slack = step_rhs - moved;
        report.step_worst_slack = report.step_worst_slack.min(step_slack);
        if step_slack < -tol && !near_degenerate {
            report.violations.push(EstimatorBoundsViolation {
                t,
                check: "step_bound",
                lhs: moved,
                rhs: step_rhs,
            });
        }

        if rec.rho == 1 && phi_norm > 0.0 {
            let wbar_eff = rec.y - phi.dot(theta_star);
            let (en, wn) = (rec.e / phi_norm, wbar_eff / phi_norm);
            running += -0.5 * en * en + 2.0 * wn * wn;
            report.nu_sq_sum += rec.nu * rec.nu;
        }
        let v = lyapunov(&rec.theta_hat, theta_star);
        let slack = running - v;
        report.lyapunov_worst_slack = report.lyapunov_worst_slack.min(slack);
        if slack < -tol * (k + 1) as f64 && !near_degenerate {
            report.violations.push(EstimatorBoundsViolation {
                t,
                check: "lyapunov_bound",
                lhs: v,
                rhs: running,
            });
        }
        report.steps += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn scalar_cfg(lo: f64, hi: f64) -> EstimatorConfig {
        let b = ParameterBox::new(vec![lo], vec![hi], 0).unwrap();
        EstimatorConfig::new(b, DVector::from_vec(vec![lo.max(0.5)])).unwrap()
    }

    #[test]
    fn prediction_error_examples() {
        let th = DVector::from_vec(vec![0.5, 1.0]);
        let phi = DVector::from_vec(vec![2.0, -1.0]);
        assert_eq!(prediction_error(&phi, &th, phi.dot(&th)), 0.0);
        assert_eq!(prediction_error(&DVector::zeros(2), &th, 3.0), 3.0);
        assert_eq!(
            prediction_error(&DVector::from_vec(vec![1.0, 2.0]), &DVector::zeros(2), 5.0),
            5.0
        );
    }

    #[test]
    fn gate_examples() {
        let b = ParameterBox::new(vec![1.0], vec![1.0], 0).unwrap();
        assert_eq!(b.norm(), 1.0);
        let cfg = EstimatorConfig::new(b, DVector::from_vec(vec![1.0])).unwrap();
        let zero = DVector::zeros(1);
        assert_eq!(deadzone_gate(&zero, 1.0, &cfg), 0);
        assert_eq!(deadzone_gate(&zero, 0.0, &cfg), 0);
        let one = DVector::from_vec(vec![1.0]);
        assert_eq!(deadzone_gate(&one, 1e9, &cfg), 1);
        let finite = cfg.clone().with_delta(Deadzone::Finite(1.0));
        assert_eq!(deadzone_gate(&zero, 0.0, &finite), 0);
        assert_eq!(deadzone_gate(&one, 2.9, &finite), 1);
        assert_eq!(deadzone_gate(&one, 3.1, &finite), 0);
        assert_eq!(deadzone_gate(&one, -3.1, &finite), 0);
    }

    #[test]
    fn update_examples() {
        // Scalar case: the beta_0 interval has to exclude zero, so the
        // estimate starts at 0.5 instead of 0 and y_next is shifted to keep
        // the same error of 2.
        let mut est = ProjectionEstimator::new(scalar_cfg(0.5, 3.0));
        let phi = DVector::from_vec(vec![1.0]);
        let step = est.update(&phi, 2.5).unwrap();
        assert_eq!(step.e, 2.0);
        assert_eq!(step.rho, 1);
        assert_eq!(step.nu, 2.0);
        assert_abs_diff_eq!(step.theta_check[0], 2.5);
        assert_abs_diff_eq!(step.theta_hat[0], 2.5);

        let mut est = ProjectionEstimator::new(scalar_cfg(0.5, 1.5));
        let step = est.update(&phi, 2.5).unwrap();
        assert_abs_diff_eq!(step.theta_check[0], 2.5);
        assert_abs_diff_eq!(step.theta_hat[0], 1.5);
        assert!((step.theta_hat[0] - 0.5f64).abs() <= step.nu);

        let mut est = ProjectionEstimator::new(scalar_cfg(0.5, 1.5));
        let step = est.update(&phi, 0.5).unwrap();
        assert_eq!(step.e, 0.0);
        assert_eq!(step.nu, 0.0);
        assert_eq!(step.theta_hat[0], 0.5);
    }

    #[test]
    fn zero_regressor_never_moves() {
        let mut est = ProjectionEstimator::new(scalar_cfg(0.5, 3.0));
        let step = est.update(&DVector::zeros(1), 10.0).unwrap();
        assert_eq!(step.rho, 0);
        assert_eq!(step.theta_hat[0], 0.5);
    }

    #[test]
    fn floor_disables_small_regressors() {
        let cfg = scalar_cfg(0.5, 3.0).with_min_phi_norm(0.1);
        let mut est = ProjectionEstimator::new(cfg);
        let step = est.update(&DVector::from_vec(vec![0.05]), 1.0).unwrap();
        assert_eq!(step.rho, 0);
        assert_eq!(step.theta_hat[0], 0.5);
    }

    #[test]
    fn theta0_is_projected() {
        let b = ParameterBox::new(vec![1.0, 1.0], vec![2.0, 2.0], 0).unwrap();
        let cfg = EstimatorConfig::new(b, DVector::from_vec(vec![0.0, 5.0])).unwrap();
        assert_eq!(cfg.theta0(), &DVector::from_vec(vec![1.0, 2.0]));
    }

    #[test]
    fn lyapunov_examples() {
        let a = DVector::from_vec(vec![1.0, 2.0]);
        assert_eq!(lyapunov(&a, &a), 0.0);
        let b = DVector::from_vec(vec![4.0, 6.0]);
        assert_eq!(lyapunov(&b, &a), 25.0);
        let s = ParameterBox::new(vec![-1.0, 0.5], vec![1.0, 2.0], 1).unwrap();
        let corner_a = DVector::from_vec(vec![-1.0, 0.5]);
        let corner_b = DVector::from_vec(vec![1.0, 2.0]);
        assert!(lyapunov(&corner_a, &corner_b) <= 4.0 * s.norm().powi(2));
    }

    #[test]
    fn deadzone_serde() {
        let inf: Deadzone = serde_json_like("\"inf\"");
        assert_eq!(inf, Deadzone::Infinite);
        assert!(Deadzone::new(0.0).is_err());
        assert_eq!(Deadzone::new(f64::INFINITY).unwrap(), Deadzone::Infinite);
    }

    // Minimal JSON-string deserializer via serde's value-less path.
    fn serde_json_like(s: &str) -> Deadzone {
        use serde::de::value::{Error as DeError, StrDeserializer};
        use serde::de::IntoDeserializer;
        let inner = s.trim_matches('"');
        let de: StrDeserializer<'_, DeError> = inner.into_deserializer();
        Deadzone::deserialize(de).unwrap()
    }
}
