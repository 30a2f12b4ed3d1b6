use std::fmt;

use nalgebra::DVector;
use serde::Serialize;

use crate::analysis::crude::crude_model_residual;
use crate::analysis::decomposition::{decompose_error, DecompositionContext};
use crate::analysis::extended::ExtendedSystem;
use crate::analysis::good::{build_good_model, good_model_residual};
use crate::analysis::rel;
use crate::controller::{check_error_identities, SimulationTrace};
use crate::error::Result;
use crate::estimator::{verify_estimator_bounds, EstimatorConfig};
use crate::model::TimeVaryingPlant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CheckStatus {
    Pass,
    Fail,
    Skip,
}

impl fmt::Display for CheckStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CheckStatus::Pass => "PASS",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skip => "SKIP",
        })
    }
}

/// One invariant. `worst_slack >= 0` means satisfied; for residual checks
/// it is `tolerance - worst relative residual`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: &'static str,
    pub status: CheckStatus,
    pub worst_slack: f64,
    pub checked: usize,
    pub note: String,
}

impl CheckResult {
    fn skip(name: &'static str, note: impl Into<String>) -> Self {
        Self {
            name,
            status: CheckStatus::Skip,
            worst_slack: f64::NAN,
            checked: 0,
            note: note.into(),
        }
    }

    fn judged(name: &'static str, worst_slack: f64, checked: usize) -> Self {
        let status = if checked == 0 {
            CheckStatus::Skip
        } else if worst_slack >= 0.0 {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        };
        Self {
            name,
            status,
            worst_slack,
            checked,
            note: if checked == 0 {
                "no checkable steps".into()
            } else {
                String::new()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    /// Per-step tolerance for the estimator inequalities.
    pub estimator_tol: f64,
    /// Relative tolerance for model reconstructions.
    pub identity_tol: f64,
    /// Tolerance for the rank-one and window identities.
    pub structural_tol: f64,
    /// Slack allowed on the zero-disturbance update energy bound.
    pub energy_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            estimator_tol: 1e-9,
            identity_tol: 1e-8,
            structural_tol: 1e-12,
            energy_tol: 1e-6,
        }
    }
}

/// Runs every applicable invariant on a trace.
///
/// Checks that rely on a single true parameter vector (the Lyapunov bound,
/// error identities, nominal model and decomposition) only run for
/// time-invariant plants; the decomposition also needs `d + 1` steps of
/// lookahead and is skipped with a note otherwise.
pub fn verify_trace(
    trace: &SimulationTrace,
    plant: &TimeVaryingPlant,
    est: &EstimatorConfig,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    let mut checks = Vec::new();
    let t0 = trace.t0();
    let t_end = trace.t_end();
    let d = trace.d() as i64;
    let pbox = &est.param_box;
    let invariant = plant.is_time_invariant();
    let theta_star: DVector<f64> = plant.theta_star(t0)?.to_vector();
    let star_in_box = pbox.contains(&theta_star, 1e-12);

    // Projection keeps every estimate in the box.
    let mut box_slack = f64::INFINITY;
    for r in trace.records() {
        for (i, x) in r.theta_hat.iter().enumerate() {
            box_slack = box_slack.min(x - pbox.lower()[i]).min(pbox.upper()[i] - x);
        }
    }
    checks.push(CheckResult::judged(
        "box_containment",
        box_slack,
        trace.records().len(),
    ));

    let bounds = verify_estimator_bounds(trace, &theta_star, opts.estimator_tol)?;
    checks.push(CheckResult::judged(
        "step_bound",
        bounds.step_worst_slack + opts.estimator_tol,
        bounds.steps,
    ));
    let why_not = if !invariant {
        Some("plant is time-varying")
    } else if !star_in_box {
        Some("true parameters lie outside the box")
    } else {
        None
    };
    match why_not {
        Some(note) => {
            checks.push(CheckResult::skip("lyapunov_bound", note));
            checks.push(CheckResult::skip("update_energy", note));
        }
        None => {
            checks.push(CheckResult::judged(
                "lyapunov_bound",
                bounds.lyapunov_worst_slack + opts.estimator_tol,
                bounds.steps,
            ));

            let quiet = trace.records().iter().all(|r| r.w == 0.0);
            let p = plant.at(t0)?;
            let x0_scale = 1.0 + trace.x0().norm();
            let consistent = trace
                .x0()
                .plant_residuals(&p)
                .iter()
                .all(|r| r.abs() <= 1e-9 * x0_scale);
            if !quiet {
                checks.push(CheckResult::skip(
                    "update_energy",
                    "disturbance is not zero",
                ));
            } else if !consistent {
                checks.push(CheckResult::skip(
                    "update_energy",
                    "initial history is not a plant trajectory",
                ));
            } else {
                let cap = 8.0 * pbox.norm().powi(2);
                checks.push(CheckResult::judged(
                    "update_energy",
                    cap + opts.energy_tol - bounds.nu_sq_sum,
                    bounds.steps,
                ));
            }
        }
    }

    if !invariant {
        for name in [
            "prediction_identity",
            "tracking_identity",
            "good_model",
            "decomposition_reconstruction",
            "delta_bar_norm",
            "nu_bar_bound",
            "delta_bounds",
            "eta0_bound",
            "extended_system",
        ] {
            checks.push(CheckResult::skip(name, "plant is time-varying"));
        }
    } else {
        let ids = check_error_identities(trace, &theta_star)?;
        checks.push(CheckResult::judged(
            "prediction_identity",
            opts.identity_tol - ids.prediction_residual,
            ids.prediction_checked,
        ));
        checks.push(CheckResult::judged(
            "tracking_identity",
            opts.identity_tol - ids.tracking_residual,
            ids.tracking_checked,
        ));

        let good = build_good_model(&plant.at(t0)?)?;
        let mut worst = 0.0f64;
        let mut count = 0;
        for t in (t0 - 1)..=(t_end - d - 1) {
            let (res, mag) = good_model_residual(&good, trace, t)?;
            worst = worst.max(rel(res, mag));
            count += 1;
        }
        checks.push(CheckResult::judged(
            "good_model",
            opts.identity_tol - worst,
            count,
        ));
    }

    let mut worst = 0.0f64;
    let mut count = 0;
    for t in (t0 - 1)..=(t_end - d - 1) {
        let (res, mag) = crude_model_residual(trace, plant, pbox.beta0_floor(), t)?;
        worst = worst.max(rel(res, mag));
        count += 1;
    }
    checks.push(CheckResult::judged(
        "crude_model",
        opts.identity_tol - worst,
        count,
    ));

    if invariant {
        let first = t0 + d - 1;
        let last = t_end - d - 1;
        let names = [
            "decomposition_reconstruction",
            "delta_bar_norm",
            "nu_bar_bound",
            "delta_bounds",
            "eta0_bound",
            "extended_system",
        ];
        if last < first {
            for name in names {
                checks.push(CheckResult::skip(
                    name,
                    format!(
                        "trace too short: needs {} steps of lookahead past t = {first}",
                        d + 1
                    ),
                ));
            }
        } else {
            let good = build_good_model(&plant.at(t0)?)?;
            let ext = ExtendedSystem::new(&good);
            let ctx = DecompositionContext {
                trace,
                good: &good,
                beta0_floor: pbox.beta0_floor(),
                box_norm: pbox.norm(),
                delta: est.delta,
                theta_star: &theta_star,
            };
            let mut recon = 0.0f64;
            let mut ext_res = 0.0f64;
            let mut gap = 0.0f64;
            let mut nu_slack = f64::INFINITY;
            let mut delta_slack = f64::INFINITY;
            let mut eta0_slack: Option<f64> = None;
            let mut count = 0;
            for t in first..=last {
                let dec = decompose_error(&ctx, t)?;
                recon = recon.max(rel(dec.residual, dec.magnitude));
                let (r, m) = ext.residual(trace, &dec)?;
                ext_res = ext_res.max(rel(r, m));
                gap = gap.max(dec.slacks.delta_bar_gap);
                nu_slack = nu_slack.min(dec.slacks.nu_bar_slack);
                for (k, s) in dec.slacks.delta_slacks.iter().enumerate() {
                    let bound = s + super::spectral_norm(&dec.deltas[k]);
                    delta_slack = delta_slack.min(s + 1e-9 * (1.0 + bound));
                }
                if let Some(s) = dec.slacks.eta0_slack {
                    eta0_slack = Some(eta0_slack.map_or(s, |w| w.min(s)));
                }
                count += 1;
            }
            checks.push(CheckResult::judged(
                "decomposition_reconstruction",
                opts.identity_tol - recon,
                count,
            ));
            checks.push(CheckResult::judged(
                "delta_bar_norm",
                opts.structural_tol - gap,
                count,
            ));
            checks.push(CheckResult::judged(
                "nu_bar_bound",
                nu_slack + opts.structural_tol,
                count,
            ));
            checks.push(CheckResult::judged("delta_bounds", delta_slack, count));
            match (eta0_slack, star_in_box) {
                (Some(s), true) => checks.push(CheckResult::judged(
                    "eta0_bound",
                    s + opts.structural_tol,
                    count,
                )),
                (Some(_), false) => checks.push(CheckResult::skip(
                    "eta0_bound",
                    "true parameters lie outside the box",
                )),
                (None, _) => checks.push(CheckResult::skip("eta0_bound", "deadzone is infinite")),
            }
            checks.push(CheckResult::judged(
                "extended_system",
                opts.identity_tol - ext_res,
                count,
            ));
        }
    }
    Ok(VerifyReport { checks })
}
