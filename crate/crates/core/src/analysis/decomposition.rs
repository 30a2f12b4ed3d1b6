use nalgebra::{DMatrix, DVector};

use crate::analysis::crude::build_crude_model;
use crate::analysis::good::GoodModel;
use crate::analysis::spectral_norm;
use crate::controller::SimulationTrace;
use crate::error::{Error, Result};
use crate::estimator::Deadzone;

/// Inputs shared by every decomposition along one trace of a
/// time-invariant plant.
#[derive(Debug, Clone, Copy)]
pub struct DecompositionContext<'a> {
    pub trace: &'a SimulationTrace,
    pub good: &'a GoodModel,
    pub beta0_floor: f64,
    pub box_norm: f64,
    pub delta: Deadzone,
    pub theta_star: &'a DVector<f64>,
}

/// `phi(t+1) = A_g phi(t) + sum_j Delta_j(t) phi(t-j) + eta(t)` at one `t`.
///
/// Per-row quantities are indexed by `s = t+1 ..= t+d+1` (position `s-t-1`):
/// `nu_bar(s-1) = rho_s err(s) / ||phi(s-d)||`,
/// `Delta_bar_i(s) = rho_s err(s) / ||phi(s-d)||^2 B_i phi(s-d)^T`,
/// `eta_0(s) = (1 - rho_s) err(s)`, with `err = y - y*`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorDecomposition {
    pub t: i64,
    pub deltas: Vec<DMatrix<f64>>,
    pub eta: DVector<f64>,
    pub eta0: Vec<f64>,
    pub nu_bar: Vec<f64>,
    pub delta_bar_1: DMatrix<f64>,
    pub delta_bar_2: Vec<DMatrix<f64>>,
    pub residual: f64,
    pub magnitude: f64,
    pub slacks: DecompositionSlacks,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionSlacks {
    /// Worst `| ||Delta_bar_i(s)|| - |nu_bar(s-1)| | / (1 + |nu_bar(s-1)|)`.
    pub delta_bar_gap: f64,
    /// Worst `sum_{r=s-d+1}^{s} nu(r) - |nu_bar(s-1)|` (row-indexed `nu`).
    pub nu_bar_slack: f64,
    /// Worst `(4||S|| + delta)/delta |wbar| - |eta_0(s)|`, finite `delta` only.
    pub eta0_slack: Option<f64>,
    /// Per `j`: explicit coefficient bound minus `||Delta_j(t)||`.
    pub delta_slacks: Vec<f64>,
}

impl DecompositionSlacks {
    pub fn worst_delta_slack(&self) -> f64 {
        self.delta_slacks
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

struct Row {
    err: f64,
    rho: f64,
    phi_lag: DVector<f64>,
}

fn row(ctx: &DecompositionContext<'_>, s: i64) -> Result<Row> {
    let r = ctx.trace.record(s)?;
    Ok(Row {
        err: r.y - r.ystar,
        rho: f64::from(r.rho),
        phi_lag: ctx.trace.phi(s - ctx.trace.d() as i64)?,
    })
}

impl Row {
    fn nu_bar(&self) -> f64 {
        if self.rho == 0.0 {
            0.0
        } else {
            self.err / self.phi_lag.norm()
        }
    }

    fn delta_bar(&self, b: &DVector<f64>) -> DMatrix<f64> {
        if self.rho == 0.0 {
            return DMatrix::zeros(b.len(), b.len());
        }
        let nrm = self.phi_lag.norm();
        b * (&self.phi_lag / nrm).transpose() * (self.err / nrm)
    }

    fn eta0(&self) -> f64 {
        (1.0 - self.rho) * self.err
    }
}

/// Sum of row `nu` over `s-d+1 ..= s`.
fn nu_window(trace: &SimulationTrace, s: i64) -> Result<f64> {
    let d = trace.d() as i64;
    let mut acc = 0.0;
    for r in (s - d + 1)..=s {
        acc += trace.record(r)?.nu.abs();
    }
    Ok(acc)
}

/// Decomposes the loop at `t`, which needs `t0 + d - 1 <= t <= T - d - 1`.
pub fn decompose_error(ctx: &DecompositionContext<'_>, t: i64) -> Result<ErrorDecomposition> {
    let trace = ctx.trace;
    let plant = ctx.good.plant();
    let (n, d) = (plant.n(), plant.d());
    let di = d as i64;
    if t < trace.t0() + di - 1 {
        return Err(Error::OutOfWindow(t));
    }
    if t + di + 1 > trace.t_end() {
        return Err(Error::InsufficientHistory(format!(
            "decomposition at t = {t} needs rows through {}, trace ends at {}",
            t + di + 1,
            trace.t_end()
        )));
    }
    let b0 = plant.b_coeff(0);
    let a = |i: usize| plant.a_coeff(i);
    let (b1, b2) = (&ctx.good.b1, &ctx.good.b2);

    let rows: Vec<Row> = ((t + 1)..=(t + di + 1))
        .map(|s| row(ctx, s))
        .collect::<Result<_>>()?;
    let at = |s: i64| &rows[(s - t - 1) as usize];
    let delta_bar_2: Vec<DMatrix<f64>> = rows.iter().map(|r| r.delta_bar(b2)).collect();
    let db2 = |s: i64| &delta_bar_2[(s - t - 1) as usize];
    let delta_bar_1 = at(t + 1).delta_bar(b1);
    let nu_bar: Vec<f64> = rows.iter().map(Row::nu_bar).collect();
    let eta0: Vec<f64> = rows.iter().map(Row::eta0).collect();

    let crude = build_crude_model(trace.theta_hat(t + 1)?, plant, ctx.beta0_floor)?;

    let mut deltas: Vec<DMatrix<f64>> = (0..d)
        .map(|k| db2(t + di - k as i64) * (a(k + 1) / b0))
        .collect();
    deltas[0] += db2(t + di + 1) * &crude.a_b * (a(0) / b0);
    deltas[d - 1] += &delta_bar_1;

    let ystar = |s: i64| trace.record(s).map(|r| r.ystar);
    let w_at = |s: i64| trace.record(s).map(|r| r.w);
    let mut eta_terms: Vec<DVector<f64>> = Vec::new();
    eta_terms.push(b1 * ystar(t + 1)?);
    let mut ref_sum = 0.0;
    let mut eta0_sum = 0.0;
    for j in 0..=d {
        let s = t + 1 + j as i64;
        ref_sum += a(d - j) * ystar(s)?;
        eta0_sum += a(d - j) / b0 * at(s).eta0();
    }
    eta_terms.push(b2 * (ref_sum / b0));
    eta_terms.push(b2 * (-w_at(t + di + 1)? / b0));
    eta_terms.push(b1 * at(t + 1).eta0());
    let exo = &crude.b3 * ystar(t + di + 1)? + &crude.b4 * w_at(t + 1)?;
    eta_terms.push(db2(t + di + 1) * exo * (a(0) / b0));
    eta_terms.push(b2 * eta0_sum);
    let eta = eta_terms
        .iter()
        .fold(DVector::zeros(b1.len()), |acc, v| acc + v);

    let phi_next = trace.phi(t + 1)?;
    let mut pred = &ctx.good.a_g * trace.phi(t)?;
    let mut magnitude = phi_next.norm() + spectral_norm(&ctx.good.a_g) * trace.phi(t)?.norm();
    for (j, dj) in deltas.iter().enumerate() {
        let phi_j = trace.phi(t - j as i64)?;
        magnitude += spectral_norm(dj) * phi_j.norm();
        pred += dj * phi_j;
    }
    pred += &eta;
    magnitude += eta_terms.iter().map(|v| v.norm()).sum::<f64>();
    let residual = (phi_next - pred).norm();

    // Structural slacks.
    let mut delta_bar_gap: f64 = 0.0;
    let mut nu_bar_slack = f64::INFINITY;
    for k in 0..rows.len() {
        let s = t + 1 + k as i64;
        let nb = nu_bar[k].abs();
        delta_bar_gap = delta_bar_gap.max((delta_bar_2[k].norm() - nb).abs() / (1.0 + nb));
        if k == 0 && n > 0 {
            delta_bar_gap = delta_bar_gap.max((delta_bar_1.norm() - nb).abs() / (1.0 + nb));
        }
        nu_bar_slack = nu_bar_slack.min(nu_window(trace, s)? - nb);
    }
    let eta0_slack = match ctx.delta {
        Deadzone::Infinite => None,
        Deadzone::Finite(delta) => {
            let coef = (4.0 * ctx.box_norm + delta) / delta;
            let mut worst = f64::INFINITY;
            for (k, r) in rows.iter().enumerate() {
                let s = t + 1 + k as i64;
                let wbar_eff = trace.record(s)?.y - r.phi_lag.dot(ctx.theta_star);
                worst = worst.min(coef * wbar_eff.abs() - eta0[k].abs());
            }
            Some(worst)
        }
    };
    let a_b_norm = spectral_norm(&crude.a_b);
    let b1_norm = b1.norm();
    let mut delta_slacks = Vec::with_capacity(d);
    for (k, dk) in deltas.iter().enumerate() {
        let mut bound = (a(k + 1) / b0).abs() * nu_window(trace, t + di - k as i64)?;
        if k == 0 {
            bound += (a(0) / b0).abs() * nu_window(trace, t + di + 1)? * a_b_norm;
        }
        if k == d - 1 {
            bound += b1_norm * nu_window(trace, t + 1)?;
        }
        delta_slacks.push(bound - spectral_norm(dk));
    }

    Ok(ErrorDecomposition {
        t,
        deltas,
        eta,
        eta0,
        nu_bar,
        delta_bar_1,
        delta_bar_2,
        residual,
        magnitude,
        slacks: DecompositionSlacks {
            delta_bar_gap,
            nu_bar_slack,
            eta0_slack,
            delta_slacks,
        },
    })
}
