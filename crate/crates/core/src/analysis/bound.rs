use serde::Serialize;

use crate::controller::{SignalSpec, SimulationTrace};
use crate::error::{Error, Result};

/// What the convolution bound needs from one run: `||phi(k)||` for
/// `k = t0 ..= T`, `||x_0||`, and the exogenous size at each `k`.
///
/// The exogenous term at `k` is `|y*(k+d)| + |w(k)|`: `u(k)` is chosen from
/// `y*(k+d)`, so the reference enters `phi(k)` with a `d`-step preview.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayRun {
    pub x0_norm: f64,
    pub phi_norms: Vec<f64>,
    pub exo: Vec<f64>,
}

impl DecayRun {
    pub fn from_trace(
        trace: &SimulationTrace,
        reference: &SignalSpec,
        disturbance: &SignalSpec,
    ) -> Result<Self> {
        let d = trace.d() as i64;
        let mut phi_norms = Vec::with_capacity(trace.records().len());
        let mut exo = Vec::with_capacity(trace.records().len());
        for r in trace.records() {
            phi_norms.push(trace.phi(r.t)?.norm());
            exo.push(reference.value(r.t + d).abs() + disturbance.value(r.t).abs());
        }
        Ok(Self {
            x0_norm: trace.x0().norm(),
            phi_norms,
            exo,
        })
    }

    /// `lambda^k ||x_0|| + sum_{j<=k} lambda^{k-j} exo_j` for every `k`.
    fn drive(&self, lambda: f64) -> Vec<f64> {
        let mut conv = 0.0;
        let mut pow = 1.0;
        self.exo
            .iter()
            .map(|e| {
                conv = lambda * conv + e;
                let v = pow * self.x0_norm + conv;
                pow *= lambda;
                v
            })
            .collect()
    }

    /// `max_k ||phi(k)|| / drive_k`, infinite if some nonzero state has no drive.
    fn ratio(&self, lambda: f64) -> f64 {
        self.phi_norms
            .iter()
            .zip(self.drive(lambda))
            .fold(0.0, |m, (p, s)| {
                if *p == 0.0 {
                    m
                } else if s > 0.0 {
                    f64::max(m, p / s)
                } else {
                    f64::INFINITY
                }
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundFit {
    pub feasible: bool,
    pub lambda: f64,
    /// Reported constant: `c_fit * margin`.
    pub c: f64,
    pub c_fit: f64,
    pub margin: f64,
    pub lambda_under: f64,
    /// Smallest `c drive_k - ||phi(k)||` over the fitting set.
    pub min_slack: f64,
    /// `(lambda, c_fit(lambda))` along the grid.
    pub frontier: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundViolation {
    pub run: usize,
    pub k: usize,
    pub lhs: f64,
    pub rhs: f64,
}

/// Fits `||phi(k)|| <= c lambda^k ||x_0|| + sum_j c lambda^{k-j} exo_j` over
/// `runs` on a grid of `grid` rates in `(lambda_under + 1e-3, 1)`.
///
/// Every rate in the grid admits some `c` (the worst ratio), so the grid
/// traces a frontier; the reported rate minimises the steady-state gain
/// `c / (1 - lambda)` along it. The constant is then inflated by `margin`
/// (at least 1) to cover held-out runs of the same distribution.
pub fn fit_convolution_bound(
    runs: &[DecayRun],
    lambda_under: f64,
    grid: usize,
    margin: f64,
) -> Result<BoundFit> {
    if runs.is_empty() {
        return Err(Error::Invalid("no runs to fit".into()));
    }
    if !(0.0..1.0).contains(&lambda_under) {
        return Err(Error::Invalid(format!(
            "lambda_under = {lambda_under} outside [0, 1)"
        )));
    }
    if grid < 2 || !(margin >= 1.0) {
        return Err(Error::Invalid(
            "grid needs two points and margin >= 1".into(),
        ));
    }
    let lo = lambda_under + 1e-3;
    if lo >= 1.0 {
        return Err(Error::Invalid("no room for a rate below 1".into()));
    }
    let hi = 1.0 - 1e-4 * (1.0 - lo);
    let frontier: Vec<(f64, f64)> = (0..grid)
        .map(|i| {
            let lambda = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
            let c = runs.iter().map(|r| r.ratio(lambda)).fold(0.0, f64::max);
            (lambda, c)
        })
        .collect();
    let best = frontier
        .iter()
        .filter(|(_, c)| c.is_finite())
        .min_by(|a, b| (a.1 / (1.0 - a.0)).total_cmp(&(b.1 / (1.0 - b.0))))
        .copied();
    let Some((lambda, c_fit)) = best else {
        return Ok(BoundFit {
            feasible: false,
            lambda: f64::NAN,
            c: f64::INFINITY,
            c_fit: f64::INFINITY,
            margin,
            lambda_under,
            min_slack: f64::NEG_INFINITY,
            frontier,
        });
    };
    let c = c_fit * margin;
    let min_slack = runs
        .iter()
        .flat_map(|r| {
            r.drive(lambda)
                .into_iter()
                .zip(r.phi_norms.clone())
                .map(|(s, p)| c * s - p)
                .collect::<Vec<_>>()
        })
        .fold(f64::INFINITY, f64::min);
    Ok(BoundFit {
        feasible: true,
        lambda,
        c,
        c_fit,
        margin,
        lambda_under,
        min_slack,
        frontier,
    })
}

/// Pointwise violations of a fitted bound on (typically held-out) runs.
pub fn bound_violations(fit: &BoundFit, runs: &[DecayRun]) -> Vec<BoundViolation> {
    let mut out = Vec::new();
    if !fit.feasible {
        return out;
    }
    for (i, r) in runs.iter().enumerate() {
        for (k, (s, p)) in r
            .drive(fit.lambda)
            .into_iter()
            .zip(&r.phi_norms)
            .enumerate()
        {
            let rhs = fit.c * s;
            if *p > rhs * (1.0 + 1e-12) {
                out.push(BoundViolation {
                    run: i,
                    k,
                    lhs: *p,
                    rhs,
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct L2Report {
    /// First time included, `t0 + 2d - 1`.
    pub start: i64,
    pub sum: f64,
    /// Sum over the last `tail` steps.
    pub tail_increment: f64,
    pub ratio: f64,
    pub converged: bool,
}

/// Cumulative squared tracking error from `t0 + 2d - 1` on a
/// disturbance-free trace, with its ratio to `||x_0||^2 + sup |y*|^2`.
pub fn l2_tracking_check(
    trace: &SimulationTrace,
    sup_ystar: f64,
    tail: usize,
    threshold: f64,
) -> Result<L2Report> {
    if trace.records().iter().any(|r| r.w != 0.0) {
        return Err(Error::Invalid(
            "the tracking-energy check needs w = 0".into(),
        ));
    }
    let start = trace.t0() + 2 * trace.d() as i64 - 1;
    let terms: Vec<f64> = trace
        .records()
        .iter()
        .filter(|r| r.t >= start)
        .map(|r| r.eps * r.eps)
        .collect();
    if terms.len() <= tail {
        return Err(Error::InsufficientHistory(format!(
            "need more than {tail} steps after t = {start}"
        )));
    }
    let sum: f64 = terms.iter().sum();
    let tail_increment: f64 = terms[terms.len() - tail..].iter().sum();
    let denom = trace.x0().norm().powi(2) + sup_ystar * sup_ystar;
    let ratio = if denom > 0.0 {
        sum / denom
    } else if sum == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(L2Report {
        start,
        sum,
        tail_increment,
        ratio,
        converged: sum.is_finite() && tail_increment < threshold,
    })
}
