//! Certainty-equivalence control law and the closed-loop simulation engine.

pub mod history;
pub mod signal;
pub mod trace;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::estimator::{lyapunov, EstimatorConfig, ProjectionEstimator};
use crate::model::{plant_step, predictor_form, InitialCondition, TimeVaryingPlant};

pub use history::RegressorHistory;
pub use signal::SignalSpec;
pub use trace::{
    check_error_identities, tracking_error, ErrorIdentityReport, SimulationTrace, TraceRecord,
};

/// Input that makes `phi(t)^T theta_hat = y*(t+d)`.
///
/// `y_recent` holds `y(t) .. y(t-n+1)`, `u_past` holds `u(t-1) .. u(t-m-d+1)`.
/// Fails when `|beta_hat_0|` is below `beta0_floor`, which the projection
/// rules out for any estimate inside the box.
pub fn control_input(
    theta_hat: &DVector<f64>,
    n: usize,
    y_recent: &[f64],
    u_past: &[f64],
    ystar_ahead: f64,
    beta0_floor: f64,
) -> Result<f64> {
    if y_recent.len() != n || n + 1 + u_past.len() != theta_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: theta_hat.len(),
            got: y_recent.len() + 1 + u_past.len(),
        });
    }
    let beta0 = theta_hat[n];
    if !(beta0.abs() >= beta0_floor * (1.0 - 1e-12)) || beta0 == 0.0 {
        return Err(Error::Beta0OutOfBox {
            value: beta0,
            floor: beta0_floor,
        });
    }
    let ar: f64 = y_recent
        .iter()
        .enumerate()
        .map(|(i, y)| theta_hat[i] * y)
        .sum();
    let ma: f64 = u_past
        .iter()
        .enumerate()
        .map(|(i, u)| theta_hat[n + 1 + i] * u)
        .sum();
    Ok((ystar_ahead - ar - ma) / beta0)
}

/// Everything needed for one closed-loop run over `t0..=horizon`.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub plant: TimeVaryingPlant,
    pub estimator: EstimatorConfig,
    pub reference: SignalSpec,
    pub disturbance: SignalSpec,
    pub x0: InitialCondition,
    pub t0: i64,
    pub horizon: i64,
}

impl Simulation {
    pub fn validate(&self) -> Result<()> {
        let (n, m, d) = (self.plant.n(), self.plant.m(), self.plant.d());
        if self.estimator.dim() != self.plant.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.plant.dim(),
                got: self.estimator.dim(),
            });
        }
        if self.estimator.param_box.beta0_index() != n {
            return Err(Error::InvalidBox(format!(
                "beta_0 index {} does not match n = {n}",
                self.estimator.param_box.beta0_index()
            )));
        }
        self.x0.check(n, m, d)?;
        if self
            .x0
            .y_hist
            .iter()
            .chain(&self.x0.u_hist)
            .any(|v| !v.is_finite())
        {
            return Err(Error::Invalid("initial condition is not finite".into()));
        }
        if self.horizon <= self.t0 {
            return Err(Error::Invalid(format!(
                "horizon {} must exceed t0 = {}",
                self.horizon, self.t0
            )));
        }
        self.reference.check_finite()?;
        self.disturbance.check_finite()?;
        self.reference
            .check_covers(self.t0, self.horizon + d as i64)?;
        self.disturbance.check_covers(self.t0, self.horizon)?;
        Ok(())
    }
}

/// Runs the adaptive loop. At each `t`: the plant produces `y(t)`, the
/// estimator consumes `(phi(t-d), y(t))` to give `theta_hat(t)`, and the
/// control law picks `u(t)` so that the predicted `y(t+d)` equals `y*(t+d)`.
pub fn closed_loop_run(sim: &Simulation) -> Result<SimulationTrace> {
    sim.validate()?;
    let (n, m, d) = (sim.plant.n(), sim.plant.m(), sim.plant.d());
    let floor = sim.estimator.param_box.beta0_floor();
    let mut est = ProjectionEstimator::new(sim.estimator.clone());
    let mut hist = RegressorHistory::new(n, m, d, &sim.x0);
    let mut records = Vec::with_capacity((sim.horizon - sim.t0 + 1) as usize);

    for t in sim.t0..=sim.horizon {
        let params = sim.plant.at(t)?;
        let form = predictor_form(&params)?;
        let w = sim.disturbance.value(t);
        if !w.is_finite() {
            return Err(Error::NonFinite {
                what: "w",
                t,
                value: w,
            });
        }
        let y_past: Vec<f64> = (0..n).map(|i| hist.y(i)).collect();
        let u_delayed: Vec<f64> = (0..=m).map(|i| hist.u(d - 1 + i)).collect();
        let y = plant_step(&params, &y_past, &u_delayed, w)?;
        if !y.is_finite() {
            return Err(Error::NonFinite {
                what: "y",
                t,
                value: y,
            });
        }

        let phi_lag = hist.regressor(d - 1, d - 1);
        let step = est.update(&phi_lag, y)?;
        hist.push_y(y);

        let y_recent: Vec<f64> = (0..n).map(|i| hist.y(i)).collect();
        let u_past: Vec<f64> = (0..m + d - 1).map(|i| hist.u(i)).collect();
        let ystar_ahead = sim.reference.value(t + d as i64);
        let u = control_input(&step.theta_hat, n, &y_recent, &u_past, ystar_ahead, floor)?;
        if !u.is_finite() {
            return Err(Error::NonFinite {
                what: "u",
                t,
                value: u,
            });
        }
        hist.push_u(u);

        let wbar = crate::model::wbar(&form.f, |s| sim.disturbance.value(s), t - d as i64);
        let ystar = sim.reference.value(t);
        let v = lyapunov(&step.theta_hat, &form.theta.to_vector());
        records.push(TraceRecord {
            t,
            y,
            u,
            ystar,
            w,
            wbar,
            e: step.e,
            eps: ystar - y,
            rho: step.rho,
            nu: step.nu,
            v,
            theta_hat: step.theta_hat,
        });
    }
    SimulationTrace::new(
        (n, m, d),
        sim.t0,
        sim.x0.clone(),
        sim.estimator.theta0().clone(),
        records,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{presets, to_predictor, ParameterBox, PlantParameters};
    use approx::assert_abs_diff_eq;

    #[test]
    fn control_law_hits_reference_prediction() {
        // n = 1: theta = [alpha_0, beta_0, beta_1]
        let th = DVector::from_vec(vec![0.5, 2.0, -1.0]);
        let u = control_input(&th, 1, &[3.0], &[4.0], 1.0, 1.0).unwrap();
        let phi = DVector::from_vec(vec![3.0, u, 4.0]);
        assert_abs_diff_eq!(phi.dot(&th), 1.0, epsilon = 1e-15);
        assert!(control_input(&th, 1, &[3.0], &[4.0], 1.0, 2.5).is_err());
    }

    #[test]
    fn exact_estimate_gives_zero_tracking_error_after_delay() {
        let (plant, _) = presets::test_plant(2).unwrap();
        let theta = to_predictor(&plant).unwrap().to_vector();
        let pbox = ParameterBox::point(&theta, plant.n()).unwrap();
        let cfg = EstimatorConfig::new(pbox, theta.clone()).unwrap();
        let x0 = InitialCondition::zero(plant.n(), plant.m(), plant.d());
        let sim = Simulation {
            plant: TimeVaryingPlant::constant(plant.clone()),
            estimator: cfg,
            reference: SignalSpec::Cosine {
                amplitude: 1.0,
                frequency: 0.3,
                phase: 0.0,
            },
            disturbance: SignalSpec::Zero,
            x0,
            t0: 0,
            horizon: 50,
        };
        let trace = closed_loop_run(&sim).unwrap();
        for r in &trace.records()[plant.d()..] {
            assert_abs_diff_eq!(r.eps, 0.0, epsilon = 1e-12);
            assert_eq!(r.v, 0.0);
        }
    }

    #[test]
    fn rejects_short_samples_and_bad_dims() {
        let plant = PlantParameters::new(1, vec![0.2], vec![1.0]).unwrap();
        let theta = to_predictor(&plant).unwrap().to_vector();
        let pbox = ParameterBox::around(&theta, 1, 0.5, 0.5).unwrap();
        let cfg = EstimatorConfig::new(pbox, theta).unwrap();
        let mut sim = Simulation {
            plant: TimeVaryingPlant::constant(plant.clone()),
            estimator: cfg,
            reference: SignalSpec::Samples {
                t_start: 0,
                values: vec![0.0; 10],
            },
            disturbance: SignalSpec::Zero,
            x0: InitialCondition::zero(1, 0, 1),
            t0: 0,
            horizon: 9,
        };
        // reference needs y*(T + d)
        assert!(closed_loop_run(&sim).is_err());
        sim.horizon = 8;
        assert!(closed_loop_run(&sim).is_ok());
        sim.x0 = InitialCondition::zero(2, 0, 1);
        assert!(closed_loop_run(&sim).is_err());
    }
}
