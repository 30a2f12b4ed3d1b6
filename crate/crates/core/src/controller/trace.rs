use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::InitialCondition;

/// One time step of a closed-loop run.
///
/// `e`, `rho` and `nu` belong to the estimator update that consumed `y(t)`
/// (regressor `phi(t-d)`, estimate `theta_hat(t-1)`) and produced
/// `theta_hat(t)`. `wbar` is `f_0 w(t) + .. + f_{d-1} w(t-d+1)`, the
/// predictor disturbance that enters `y(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub t: i64,
    pub y: f64,
    pub u: f64,
    pub ystar: f64,
    pub w: f64,
    pub wbar: f64,
    pub e: f64,
    pub eps: f64,
    pub rho: u8,
    pub nu: f64,
    pub v: f64,
    pub theta_hat: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    n: usize,
    m: usize,
    d: usize,
    t0: i64,
    x0: InitialCondition,
    theta0: DVector<f64>,
    records: Vec<TraceRecord>,
}

impl SimulationTrace {
    pub fn new(
        (n, m, d): (usize, usize, usize),
        t0: i64,
        x0: InitialCondition,
        theta0: DVector<f64>,
        records: Vec<TraceRecord>,
    ) -> Result<Self> {
        x0.check(n, m, d)?;
        let p = n + m + d;
        if theta0.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: theta0.len(),
            });
        }
        for (k, r) in records.iter().enumerate() {
            if r.t != t0 + k as i64 {
                return Err(Error::Invalid(format!(
                    "trace rows must be contiguous from t0 = {t0}; row {k} has t = {}",
                    r.t
                )));
            }
            if r.theta_hat.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    got: r.theta_hat.len(),
                });
            }
        }
        Ok(Self {
            n,
            m,
            d,
            t0,
            x0,
            theta0,
            records,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.n + self.m + self.d
    }

    pub fn t0(&self) -> i64 {
        self.t0
    }

    /// Last recorded time; `t0 - 1` for an empty trace.
    pub fn t_end(&self) -> i64 {
        self.t0 + self.records.len() as i64 - 1
    }

    pub fn x0(&self) -> &InitialCondition {
        &self.x0
    }

    pub fn theta0(&self) -> &DVector<f64> {
        &self.theta0
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [TraceRecord] {
        &mut self.records
    }

    pub fn truncated(&self, t_last: i64) -> Self {
        let keep = (t_last - self.t0 + 1).clamp(0, self.records.len() as i64) as usize;
        let mut out = self.clone();
        out.records.truncate(keep);
        out
    }

    pub fn record(&self, t: i64) -> Result<&TraceRecord> {
        if t < self.t0 {
            return Err(Error::OutOfWindow(t));
        }
        self.records
            .get((t - self.t0) as usize)
            .ok_or(Error::OutOfWindow(t))
    }

    pub fn y(&self, t: i64) -> Result<f64> {
        if t >= self.t0 {
            Ok(self.record(t)?.y)
        } else {
            self.x0
                .y_hist
                .get((self.t0 - t - 1) as usize)
                .copied()
                .ok_or(Error::OutOfWindow(t))
        }
    }

    pub fn u(&self, t: i64) -> Result<f64> {
        if t >= self.t0 {
            Ok(self.record(t)?.u)
        } else {
            self.x0
                .u_hist
                .get((self.t0 - t - 1) as usize)
                .copied()
                .ok_or(Error::OutOfWindow(t))
        }
    }

    /// `phi(t) = [y(t) .. y(t-n+1), u(t) .. u(t-m-d+1)]`, available from
    /// `t0 - d` (the oldest regressor the initial condition determines).
    pub fn phi(&self, t: i64) -> Result<DVector<f64>> {
        let mut v = Vec::with_capacity(self.dim());
        for i in 0..self.n {
            v.push(self.y(t - i as i64)?);
        }
        for i in 0..(self.m + self.d) {
            v.push(self.u(t - i as i64)?);
        }
        Ok(DVector::from_vec(v))
    }

    /// `theta_hat(t)`; `t0 - 1` gives the initial estimate.
    pub fn theta_hat(&self, t: i64) -> Result<&DVector<f64>> {
        if t == self.t0 - 1 {
            Ok(&self.theta0)
        } else {
            Ok(&self.record(t)?.theta_hat)
        }
    }
}

/// `eps(t) = y*(t) - y(t)` for every recorded step.
pub fn tracking_error(trace: &SimulationTrace) -> Vec<f64> {
    trace.records().iter().map(|r| r.eps).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorIdentityReport {
    /// Worst `|eps(t) - (phi(t-d)^T theta~(t-d) - wbar(t-d))|`, `t >= t0 + d`.
    pub tracking_residual: f64,
    /// Worst `|e(t) - (-phi(t-d)^T theta~(t-1) + wbar(t-d))|`, `t >= t0 + d - 1`.
    pub prediction_residual: f64,
    pub tracking_checked: usize,
    pub prediction_checked: usize,
}

/// Algebraic identities linking the tracking and prediction errors to the
/// parameter error, for a time-invariant plant with predictor `theta_star`.
///
/// Uses the recorded `wbar`. The prediction identity needs the plant
/// equation over `t-d+1..t`, hence its later start for `d > 1`.
pub fn check_error_identities(
    trace: &SimulationTrace,
    theta_star: &DVector<f64>,
) -> Result<ErrorIdentityReport> {
    let d = trace.d() as i64;
    let mut rep = ErrorIdentityReport {
        tracking_residual: 0.0,
        prediction_residual: 0.0,
        tracking_checked: 0,
        prediction_checked: 0,
    };
    for r in trace.records() {
        let t = r.t;
        let phi = trace.phi(t - d)?;
        if t >= trace.t0() + d - 1 {
            let tilde = trace.theta_hat(t - 1)? - theta_star;
            let pred = -phi.dot(&tilde) + r.wbar;
            let scale = 1.0 + r.e.abs() + phi.norm() * (tilde.norm() + 1.0) + r.wbar.abs();
            rep.prediction_residual = rep.prediction_residual.max((r.e - pred).abs() / scale);
            rep.prediction_checked += 1;
        }
        if t >= trace.t0() + d {
            let tilde = trace.theta_hat(t - d)? - theta_star;
            let pred = phi.dot(&tilde) - r.wbar;
            let scale = 1.0 + r.eps.abs() + phi.norm() * (tilde.norm() + 1.0) + r.wbar.abs();
            rep.tracking_residual = rep.tracking_residual.max((r.eps - pred).abs() / scale);
            rep.tracking_checked += 1;
        }
    }
    Ok(rep)
}
