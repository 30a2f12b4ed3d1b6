use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::controller::SimulationTrace;
use crate::error::{Error, Result};
use crate::model::PlantParameters;

/// Nominal closed-loop model of a time-invariant plant:
///
/// `phi(t+1) = A_g phi(t) + B_1 err(t+1)
///     + B_2 sum_{j=0}^{d} (a_{d-j}/b_0) (err(t+1+j) + y*(t+1+j))
///     + B_1 y*(t+1) - B_2 w(t+d+1)/b_0`
///
/// with `err = y - y*`. Rows of `phi` are `y(t)..y(t-n+1)` then
/// `u(t)..u(t-m-d+1)`; `B_1` picks the newest output and `B_2` the newest
/// input. With `n = 0` there is no output entry and `B_1 = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct GoodModel {
    pub a_g: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    plant: PlantParameters,
}

pub fn build_good_model(p: &PlantParameters) -> Result<GoodModel> {
    let (n, m, d) = (p.n(), p.m(), p.d());
    let b0 = p.b_coeff(0);
    if b0 == 0.0 {
        return Err(Error::ZeroLeadingCoefficient);
    }
    let dim = n + m + d;
    let mut a_g = DMatrix::zeros(dim, dim);
    for k in 1..n {
        a_g[(k, k - 1)] = 1.0;
    }
    // u(t+1) from the plant equation at t+d+1; outputs older than t+1 that
    // are still in phi(t) enter directly.
    for i in (d + 1)..=n {
        a_g[(n, i - d - 1)] = p.a_coeff(i) / b0;
    }
    for i in 1..=m {
        a_g[(n, n + i - 1)] = -p.b_coeff(i) / b0;
    }
    for k in 1..(m + d) {
        a_g[(n + k, n + k - 1)] = 1.0;
    }
    let mut b1 = DVector::zeros(dim);
    if n > 0 {
        b1[0] = 1.0;
    }
    let mut b2 = DVector::zeros(dim);
    b2[n] = 1.0;
    Ok(GoodModel {
        a_g,
        b1,
        b2,
        plant: p.clone(),
    })
}

impl GoodModel {
    pub fn plant(&self) -> &PlantParameters {
        &self.plant
    }

    pub fn dim(&self) -> usize {
        self.a_g.nrows()
    }

    pub fn eigenvalues(&self) -> Result<Vec<Complex64>> {
        crate::poly::eigenvalues(&self.a_g)
    }

    /// `det(zI - A_g)`, highest power first.
    pub fn characteristic_polynomial(&self) -> Vec<f64> {
        characteristic_polynomial(&self.a_g)
    }

    /// `z^(n+d) * (z^m B(z^-1)) / b_0`, highest power first: the
    /// characteristic polynomial the nominal matrix should have.
    pub fn expected_characteristic_polynomial(&self) -> Vec<f64> {
        let p = &self.plant;
        let b0 = p.b_coeff(0);
        let mut c: Vec<f64> = p.b().iter().map(|b| b / b0).collect();
        c.extend(std::iter::repeat(0.0).take(p.n() + p.d()));
        c
    }

    /// Right-hand side of the model given the future errors and signals;
    /// `err`, `ystar` are indexed by absolute time.
    pub fn predict(
        &self,
        phi_t: &DVector<f64>,
        t: i64,
        err: impl Fn(i64) -> f64,
        ystar: impl Fn(i64) -> f64,
        w_ahead: f64,
    ) -> DVector<f64> {
        let p = &self.plant;
        let (d, b0) = (p.d(), p.b_coeff(0));
        let mut out = &self.a_g * phi_t;
        out += &self.b1 * (err(t + 1) + ystar(t + 1));
        let mut s = 0.0;
        for j in 0..=d {
            let s_t = t + 1 + j as i64;
            s += p.a_coeff(d - j) / b0 * (err(s_t) + ystar(s_t));
        }
        s -= w_ahead / b0;
        out += &self.b2 * s;
        out
    }
}

/// Residual of the nominal model at `t` along a trace, together with the
/// magnitude it should be judged against. Needs `t0 - 1 <= t <= T - d - 1`.
pub fn good_model_residual(
    model: &GoodModel,
    trace: &SimulationTrace,
    t: i64,
) -> Result<(f64, f64)> {
    let d = trace.d() as i64;
    if t < trace.t0() - 1 || t + d + 1 > trace.t_end() {
        return Err(Error::OutOfWindow(t));
    }
    let phi_t = trace.phi(t)?;
    let phi_next = trace.phi(t + 1)?;
    let row = |s: i64| trace.record(s).expect("checked window");
    let err = |s: i64| {
        let r = row(s);
        r.y - r.ystar
    };
    let ystar = |s: i64| row(s).ystar;
    let w_ahead = row(t + d + 1).w;
    let pred = model.predict(&phi_t, t, err, ystar, w_ahead);
    let p = &model.plant;
    let b0 = p.b_coeff(0).abs();
    let mut mag =
        phi_next.norm() + super::spectral_norm(&model.a_g) * phi_t.norm() + w_ahead.abs() / b0;
    mag += err(t + 1).abs() + ystar(t + 1).abs();
    for j in 0..=d {
        let s = t + 1 + j;
        mag += p.a_coeff((d - j) as usize).abs() / b0 * (err(s).abs() + ystar(s).abs());
    }
    Ok(((phi_next - pred).norm(), mag))
}

/// Faddeev-LeVerrier: coefficients of `det(zI - M)`, highest power first.
///
/// Unlike computed eigenvalues, the coefficients stay accurate when `M`
/// has a defective eigenvalue, which the nominal matrix always does at 0.
pub fn characteristic_polynomial(m: &DMatrix<f64>) -> Vec<f64> {
    let k = m.nrows();
    let mut coeffs = vec![1.0];
    let mut acc = DMatrix::zeros(k, k);
    for i in 1..=k {
        acc = m * &acc + DMatrix::identity(k, k) * coeffs[i - 1];
        coeffs.push(-(m * &acc).trace() / i as f64);
    }
    coeffs
}
