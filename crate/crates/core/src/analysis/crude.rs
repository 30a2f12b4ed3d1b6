use nalgebra::{DMatrix, DVector};

use crate::controller::SimulationTrace;
use crate::error::{Error, Result};
use crate::model::{PlantParameters, TimeVaryingPlant};

/// One-step model `phi(t+1) = A_b(t) phi(t) + B_3(t) y*(t+d+1) + B_4(t) w(t+1)`.
///
/// The output row is the plant equation at `t+1`; the input row solves the
/// control law at `t+1` for `u(t+1)` after substituting that output.
#[derive(Debug, Clone, PartialEq)]
pub struct CrudeModel {
    pub a_b: DMatrix<f64>,
    pub b3: DVector<f64>,
    pub b4: DVector<f64>,
}

/// `theta_next` is `theta_hat(t+1)`, `p` the plant in force at `t+1`.
pub fn build_crude_model(
    theta_next: &DVector<f64>,
    p: &PlantParameters,
    beta0_floor: f64,
) -> Result<CrudeModel> {
    let (n, m, d) = (p.n(), p.m(), p.d());
    let dim = n + m + d;
    if theta_next.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: theta_next.len(),
        });
    }
    let beta0 = theta_next[n];
    if !(beta0.abs() >= beta0_floor * (1.0 - 1e-12)) || beta0 == 0.0 {
        return Err(Error::Beta0OutOfBox {
            value: beta0,
            floor: beta0_floor,
        });
    }

    // y(t+1) = theta_ab^T phi(t) + w(t+1)
    let mut theta_ab = DVector::zeros(dim);
    for k in 0..n {
        theta_ab[k] = -p.a_coeff(k + 1);
    }
    for i in 0..=m {
        theta_ab[n + d - 1 + i] = p.b_coeff(i);
    }
    // y*(t+d+1) = theta_ab_hat^T phi(t) + alpha0 y(t+1) + beta0 u(t+1)
    let mut theta_hat_bar = DVector::zeros(dim);
    for i in 1..n {
        theta_hat_bar[i - 1] = theta_next[i];
    }
    for i in 1..(m + d) {
        theta_hat_bar[n + i - 1] = theta_next[n + i];
    }
    let alpha0 = if n > 0 { theta_next[0] } else { 0.0 };

    let mut a_b = DMatrix::zeros(dim, dim);
    if n > 0 {
        a_b.set_row(0, &theta_ab.transpose());
    }
    for k in 1..n {
        a_b[(k, k - 1)] = 1.0;
    }
    let u_row = (-&theta_hat_bar - &theta_ab * alpha0) / beta0;
    a_b.set_row(n, &u_row.transpose());
    for k in 1..(m + d) {
        a_b[(n + k, n + k - 1)] = 1.0;
    }
    let mut b3 = DVector::zeros(dim);
    b3[n] = 1.0 / beta0;
    let mut b4 = DVector::zeros(dim);
    if n > 0 {
        b4[0] = 1.0;
    }
    b4[n] = -alpha0 / beta0;
    Ok(CrudeModel { a_b, b3, b4 })
}

impl CrudeModel {
    pub fn norms(&self) -> [f64; 3] {
        [
            super::spectral_norm(&self.a_b),
            self.b3.norm(),
            self.b4.norm(),
        ]
    }
}

/// Crude model at `t` along a trace, valid for `t0 - 1 <= t <= T - d - 1`
/// (it needs `y*(t+d+1)` from the trace).
pub fn crude_model_at(
    trace: &SimulationTrace,
    plant: &TimeVaryingPlant,
    beta0_floor: f64,
    t: i64,
) -> Result<CrudeModel> {
    if t < trace.t0() - 1 || t + 1 > trace.t_end() {
        return Err(Error::OutOfWindow(t));
    }
    build_crude_model(trace.theta_hat(t + 1)?, &plant.at(t + 1)?, beta0_floor)
}

/// Residual and magnitude of the crude model at `t`.
pub fn crude_model_residual(
    trace: &SimulationTrace,
    plant: &TimeVaryingPlant,
    beta0_floor: f64,
    t: i64,
) -> Result<(f64, f64)> {
    let d = trace.d() as i64;
    if t + d + 1 > trace.t_end() {
        return Err(Error::OutOfWindow(t));
    }
    let model = crude_model_at(trace, plant, beta0_floor, t)?;
    let phi_t = trace.phi(t)?;
    let phi_next = trace.phi(t + 1)?;
    let ystar = trace.record(t + d + 1)?.ystar;
    let w = trace.record(t + 1)?.w;
    let pred = &model.a_b * &phi_t + &model.b3 * ystar + &model.b4 * w;
    let [na, nb3, nb4] = model.norms();
    let mag = phi_next.norm() + na * phi_t.norm() + nb3 * ystar.abs() + nb4 * w.abs();
    Ok(((phi_next - pred).norm(), mag))
}
