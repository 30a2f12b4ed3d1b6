//! Experiment drivers behind the subcommands. Everything here returns plain
//! data; the binary decides where it is written and which exit code follows.

use dstep_core::analysis::{
    bound::bound_violations, crude::crude_model_at, fit_convolution_bound, verify_trace, BoundFit,
    CheckStatus, DecayRun, VerifyOptions, VerifyReport,
};
use dstep_core::controller::{closed_loop_run, SignalSpec, SimulationTrace};
use dstep_core::estimator::Deadzone;
use dstep_core::model::{
    check_assumption1, presets, CoefficientBox, CoefficientWave, ParameterBox, PlantParameters,
    PlantSchedule, TimeVaryingPlant,
};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{EstimatorSpec, ExperimentConfig, ResolvedExperiment, Theta0Spec, X0Spec};
use crate::error::{CliError, Result};
use crate::seeding::{stream_rng, Stream};

pub fn simulate(cfg: &ExperimentConfig) -> Result<(ResolvedExperiment, SimulationTrace)> {
    let resolved = cfg.resolve()?;
    let trace = closed_loop_run(&resolved.sim)?;
    Ok((resolved, trace))
}

pub fn verify(resolved: &ResolvedExperiment, trace: &SimulationTrace) -> Result<VerifyReport> {
    let sim = &resolved.sim;
    let orders = (sim.plant.n(), sim.plant.m(), sim.plant.d());
    if (trace.n(), trace.m(), trace.d()) != orders {
        return Err(CliError::Trace(format!(
            "trace orders {:?} do not match the config {:?}",
            (trace.n(), trace.m(), trace.d()),
            orders
        )));
    }
    Ok(verify_trace(
        trace,
        &sim.plant,
        &sim.estimator,
        &VerifyOptions::default(),
    )?)
}

// ---------------------------------------------------------------------------
// The published time-varying example.

fn wave(offset: f64, amplitude: f64, frequency: f64, phase: f64) -> CoefficientWave {
    CoefficientWave {
        offset,
        amplitude,
        frequency,
        phase,
    }
}

/// The time-varying example: `a_1 = 2cos(.01s)`, `a_2 = -2sin(.007s)`,
/// `b_0 = 3.25 - 1.75cos(.008s)`, `b_1 = -cos(.02s)`, `y* = cos t`, a
/// `0.1cos(10s)` disturbance on `200 < s <= 500`, `delta = inf`, midpoint
/// initial estimate.
///
/// The published recursion writes `y(s+1)` in terms of coefficients and
/// disturbance at `s`; here `y(t)` uses the schedule at `t`, so every wave is
/// evaluated one step late (phase `- frequency`) and the disturbance window
/// moves by one. Adaptation starts at `t0 = 1` with `y(0) = y(-1) = -1`,
/// `u(-1) = 0` and `u(0)` from the control law under the initial estimate.
pub fn time_varying_example_config() -> ExperimentConfig {
    use std::f64::consts::FRAC_PI_2;
    let pbox = presets::example_parameter_box();
    let theta0 = pbox.midpoint();
    // u(0) = (y*(1) - alpha^T y - beta_1 u(-1)) / beta_0 with alpha = beta_1 = 0
    let u0 = (1.0f64).cos() / theta0[2];
    ExperimentConfig {
        plant: TimeVaryingPlant::new(PlantSchedule::Sinusoidal {
            d: 1,
            a: vec![
                wave(0.0, 2.0, 0.01, -0.01),
                wave(0.0, 2.0, 0.007, FRAC_PI_2 - 0.007),
            ],
            b: vec![
                wave(3.25, -1.75, 0.008, -0.008),
                wave(0.0, -1.0, 0.02, -0.02),
            ],
        })
        .expect("example schedule is valid"),
        coefficient_box: Some(presets::example_coefficient_box()),
        parameter_box: pbox,
        estimator: EstimatorSpec {
            delta: Deadzone::Infinite,
            theta0: Theta0Spec::Midpoint,
            min_phi_norm: 0.0,
        },
        reference: SignalSpec::Cosine {
            amplitude: 1.0,
            frequency: 1.0,
            phase: 0.0,
        },
        disturbance: SignalSpec::WindowedCosine {
            amplitude: 0.1,
            frequency: 10.0,
            phase: -10.0,
            t_start: 201,
            t_end: 501,
        },
        x0: X0Spec::Explicit {
            y_hist: vec![-1.0, -1.0],
            u_hist: vec![u0, 0.0],
        },
        t0: 1,
        horizon: 1000,
        seed: 0,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindowRms {
    pub label: &'static str,
    pub first: i64,
    pub last: i64,
    pub rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReproSummary {
    pub windows: Vec<WindowRms>,
    /// Tracking degrades once the disturbance is switched on.
    pub degrades_under_disturbance: bool,
    /// And recovers after it is switched off.
    pub recovers_after_disturbance: bool,
    pub estimates_in_box: bool,
    pub verify: VerifyReport,
}

impl ReproSummary {
    pub fn passed(&self) -> bool {
        self.degrades_under_disturbance
            && self.recovers_after_disturbance
            && self.estimates_in_box
            && self.verify.passed()
    }
}

pub fn rms_eps(trace: &SimulationTrace, first: i64, last: i64) -> f64 {
    let v: Vec<f64> = trace
        .records()
        .iter()
        .filter(|r| r.t >= first && r.t <= last)
        .map(|r| r.eps * r.eps)
        .collect();
    if v.is_empty() {
        return f64::NAN;
    }
    (v.iter().sum::<f64>() / v.len() as f64).sqrt()
}

pub fn repro_example() -> Result<(ResolvedExperiment, SimulationTrace, ReproSummary)> {
    let (resolved, trace) = simulate(&time_varying_example_config())?;
    let windows = vec![
        WindowRms {
            label: "before",
            first: 100,
            last: 200,
            rms: rms_eps(&trace, 100, 200),
        },
        WindowRms {
            label: "during",
            first: 201,
            last: 500,
            rms: rms_eps(&trace, 201, 500),
        },
        WindowRms {
            label: "after",
            first: 600,
            last: 900,
            rms: rms_eps(&trace, 600, 900),
        },
    ];
    let pbox = &resolved.sim.estimator.param_box;
    let estimates_in_box = trace
        .records()
        .iter()
        .all(|r| pbox.contains(&r.theta_hat, 0.0));
    let verify = verify(&resolved, &trace)?;
    let summary = ReproSummary {
        degrades_under_disturbance: windows[0].rms < windows[1].rms,
        recovers_after_disturbance: windows[2].rms < windows[1].rms,
        windows,
        estimates_in_box,
        verify,
    };
    Ok((resolved, trace, summary))
}

// ---------------------------------------------------------------------------
// Sweeps over a coefficient box.

/// Homogeneous-bound fitting attached to a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSettings {
    /// Extra fitting runs started from each vertex of the parameter box:
    /// the extreme initial estimates produce the largest transients, and
    /// random draws rarely reach them.
    pub vertex_runs: usize,
    pub holdout_runs: usize,
    pub grid: usize,
    pub margin: f64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            vertex_runs: 4,
            holdout_runs: 20,
            grid: 200,
            margin: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub coefficient_box: CoefficientBox,
    /// Defaults to the exact image of the coefficient box (`d = 1` only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter_box: Option<ParameterBox>,
    pub n_plants: usize,
    pub runs_per_plant: usize,
    #[serde(default)]
    pub t0: i64,
    pub horizon: i64,
    /// Drives the plant draws only, so reruns with another `seed` see the
    /// same plants.
    pub plant_seed: u64,
    pub seed: u64,
    pub reference: SignalSpec,
    pub disturbance: SignalSpec,
    #[serde(default)]
    pub delta: Deadzone,
    pub theta0: Theta0Spec,
    pub x0: X0Spec,
    /// Run the invariant suite on every run.
    #[serde(default)]
    pub verify: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSettings>,
}

impl SweepConfig {
    /// Time-invariant plants from the example box tracking `cos t`.
    pub fn example() -> Self {
        Self {
            coefficient_box: presets::example_coefficient_box(),
            parameter_box: None,
            n_plants: 50,
            runs_per_plant: 4,
            t0: 0,
            horizon: 300,
            plant_seed: 1,
            seed: 1,
            reference: SignalSpec::Cosine {
                amplitude: 1.0,
                frequency: 1.0,
                phase: 0.0,
            },
            disturbance: SignalSpec::Zero,
            delta: Deadzone::Infinite,
            theta0: Theta0Spec::Midpoint,
            x0: X0Spec::RandomUnit,
            verify: true,
            fit: None,
        }
    }

    /// Homogeneous runs (`y* = w = 0`) from unit initial histories and
    /// random initial estimates, fitted per plant and pooled.
    pub fn fit_bound_example() -> Self {
        Self {
            runs_per_plant: 20,
            reference: SignalSpec::Zero,
            theta0: Theta0Spec::Random,
            verify: false,
            fit: Some(FitSettings::default()),
            ..Self::example()
        }
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
    }

    fn parameter_box(&self) -> Result<ParameterBox> {
        match &self.parameter_box {
            Some(b) => Ok(b.clone()),
            None => self
                .coefficient_box
                .to_parameter_box_d1()
                .map_err(|e| CliError::Config(format!("{e}; give parameter_box explicitly"))),
        }
    }

    fn validate(&self) -> Result<()> {
        self.coefficient_box
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.n_plants == 0 {
            return Err(CliError::Config("n_plants must be at least 1".into()));
        }
        if self.runs_per_plant == 0 {
            return Err(CliError::Config("runs_per_plant must be at least 1".into()));
        }
        if let Some(f) = &self.fit {
            if !(f.margin >= 1.0) || f.grid < 2 || f.holdout_runs == 0 {
                return Err(CliError::Config(
                    "fit needs margin >= 1, grid >= 2 and at least one held-out run".into(),
                ));
            }
        }
        Ok(())
    }

    /// The single-run config for run `run` of plant `plant`.
    pub fn run_config(
        &self,
        plant: &PlantParameters,
        plant_index: usize,
        run: usize,
        stream: Stream,
    ) -> Result<ExperimentConfig> {
        let seed = stream_rng(self.seed, stream, plant_index as u64, run as u64).next_u64();
        Ok(ExperimentConfig {
            plant: TimeVaryingPlant::constant(plant.clone()),
            coefficient_box: Some(self.coefficient_box.clone()),
            parameter_box: self.parameter_box()?,
            estimator: EstimatorSpec {
                delta: self.delta,
                theta0: self.theta0.clone(),
                min_phi_norm: 0.0,
            },
            reference: self.reference.clone(),
            disturbance: self.disturbance.clone(),
            x0: self.x0.clone(),
            t0: self.t0,
            horizon: self.horizon,
            seed,
        })
    }

    pub fn sample_plant(&self, index: usize) -> Result<PlantParameters> {
        let mut rng = stream_rng(self.plant_seed, Stream::Plant, index as u64, 0);
        Ok(self.coefficient_box.sample(&mut rng)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantFit {
    pub feasible: bool,
    pub lambda: f64,
    pub c: f64,
    pub holdout_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlantResult {
    pub index: usize,
    pub plant: PlantParameters,
    /// Largest zero magnitude of `B`.
    pub lambda_under: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub excluded: Option<String>,
    /// `max_t` of `||A_b||`, `||B_3||`, `||B_4||` over every run.
    pub max_norms: [f64; 3],
    /// `"run <k>: <check>"` for every failed invariant.
    pub verify_failures: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<PlantFit>,
    #[serde(skip)]
    decay_runs: Vec<DecayRun>,
    #[serde(skip)]
    holdout: Vec<DecayRun>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepAggregate {
    pub plants: usize,
    pub excluded: usize,
    /// Largest zero magnitude over the box corners and every sampled plant.
    pub lambda_under: f64,
    pub max_norms: [f64; 3],
    pub verify_failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_lambda_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub holdout_violations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooled_fit: Option<BoundFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pooled_holdout_violations: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub plants: Vec<PlantResult>,
    pub aggregate: SweepAggregate,
}

impl SweepReport {
    pub fn passed(&self) -> bool {
        let a = &self.aggregate;
        let norms_ok = a.max_norms.iter().all(|x| x.is_finite());
        let fit_ok = match (&a.pooled_fit, a.holdout_violations, a.max_lambda_hat) {
            (None, ..) => true,
            (Some(p), Some(v), Some(l)) => p.feasible && v == 0 && l < 1.0,
            _ => false,
        };
        norms_ok && a.verify_failures == 0 && fit_ok
    }
}

fn max3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0].max(b[0]), a[1].max(b[1]), a[2].max(b[2])]
}

fn sweep_plant(cfg: &SweepConfig, index: usize) -> Result<PlantResult> {
    let plant = cfg.sample_plant(index)?;
    let a1 = check_assumption1(std::slice::from_ref(&plant));
    let mut out = PlantResult {
        index,
        plant: plant.clone(),
        lambda_under: a1.lambda_under,
        excluded: None,
        max_norms: [0.0; 3],
        verify_failures: Vec::new(),
        fit: None,
        decay_runs: Vec::new(),
        holdout: Vec::new(),
    };
    if !a1.ok {
        out.excluded = Some(
            a1.violations
                .first()
                .map(|v| v.reason.clone())
                .unwrap_or_else(|| "admissibility check failed".into()),
        );
        return Ok(out);
    }
    let d = plant.d() as i64;
    for run in 0..cfg.runs_per_plant {
        let (resolved, trace) = simulate(&cfg.run_config(&plant, index, run, Stream::Run)?)?;
        let sim = &resolved.sim;
        let floor = sim.estimator.param_box.beta0_floor();
        for t in (trace.t0() - 1)..=(trace.t_end() - d - 1) {
            let cm = crude_model_at(&trace, &sim.plant, floor, t)?;
            out.max_norms = max3(out.max_norms, cm.norms());
        }
        if cfg.verify {
            let rep = verify(&resolved, &trace)?;
            for c in rep.checks.iter().filter(|c| c.status == CheckStatus::Fail) {
                out.verify_failures.push(format!("run {run}: {}", c.name));
            }
        }
        if cfg.fit.is_some() {
            out.decay_runs.push(DecayRun::from_trace(
                &trace,
                &sim.reference,
                &sim.disturbance,
            )?);
        }
    }
    if let Some(fs) = &cfg.fit {
        let pbox = cfg.parameter_box()?;
        let dim = pbox.dim();
        if fs.vertex_runs > 0 && dim > 12 {
            return Err(CliError::Config(format!(
                "too many box vertices (2^{dim}) for vertex runs"
            )));
        }
        let vertices = if fs.vertex_runs > 0 { 1usize << dim } else { 0 };
        for mask in 0..vertices {
            let vertex: Vec<f64> = (0..dim)
                .map(|j| {
                    if mask >> j & 1 == 1 {
                        pbox.upper()[j]
                    } else {
                        pbox.lower()[j]
                    }
                })
                .collect();
            for r in 0..fs.vertex_runs {
                let run = cfg.runs_per_plant + mask * fs.vertex_runs + r;
                let mut rc = cfg.run_config(&plant, index, run, Stream::Run)?;
                rc.estimator.theta0 = Theta0Spec::Explicit {
                    value: vertex.clone(),
                };
                let (resolved, trace) = simulate(&rc)?;
                out.decay_runs.push(DecayRun::from_trace(
                    &trace,
                    &resolved.sim.reference,
                    &resolved.sim.disturbance,
                )?);
            }
        }
        for run in 0..fs.holdout_runs {
            let (resolved, trace) =
                simulate(&cfg.run_config(&plant, index, run, Stream::Holdout)?)?;
            out.holdout.push(DecayRun::from_trace(
                &trace,
                &resolved.sim.reference,
                &resolved.sim.disturbance,
            )?);
        }
        let fit = fit_convolution_bound(&out.decay_runs, out.lambda_under, fs.grid, fs.margin)?;
        out.fit = Some(PlantFit {
            feasible: fit.feasible,
            lambda: fit.lambda,
            c: fit.c,
            holdout_violations: bound_violations(&fit, &out.holdout).len(),
        });
    }
    Ok(out)
}

/// Runs the sweep on `workers` threads (all cores when `None`). Plants are
/// drawn and seeded by index, so the report does not depend on `workers`.
pub fn run_sweep(cfg: &SweepConfig, workers: Option<usize>) -> Result<SweepReport> {
    cfg.validate()?;
    cfg.parameter_box()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let plants: Vec<PlantResult> = pool.install(|| {
        (0..cfg.n_plants)
            .into_par_iter()
            .map(|i| sweep_plant(cfg, i))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut sample: Vec<PlantParameters> = cfg.coefficient_box.corners()?;
    sample.extend(plants.iter().map(|p| p.plant.clone()));
    let lambda_under = check_assumption1(&sample).lambda_under;
    let kept: Vec<&PlantResult> = plants.iter().filter(|p| p.excluded.is_none()).collect();
    let mut aggregate = SweepAggregate {
        plants: plants.len(),
        excluded: plants.len() - kept.len(),
        lambda_under,
        max_norms: kept.iter().fold([0.0; 3], |m, p| max3(m, p.max_norms)),
        verify_failures: kept.iter().map(|p| p.verify_failures.len()).sum(),
        max_lambda_hat: None,
        holdout_violations: None,
        pooled_fit: None,
        pooled_holdout_violations: None,
    };
    if let Some(fs) = &cfg.fit {
        let fits: Vec<&PlantFit> = kept.iter().filter_map(|p| p.fit.as_ref()).collect();
        aggregate.max_lambda_hat = Some(
            fits.iter()
                .map(|f| if f.feasible { f.lambda } else { f64::INFINITY })
                .fold(0.0, f64::max),
        );
        aggregate.holdout_violations = Some(fits.iter().map(|f| f.holdout_violations).sum());
        if lambda_under < 1.0 && !kept.is_empty() {
            let runs: Vec<DecayRun> = kept
                .iter()
                .flat_map(|p| p.decay_runs.iter().cloned())
                .collect();
            let held: Vec<DecayRun> = kept
                .iter()
                .flat_map(|p| p.holdout.iter().cloned())
                .collect();
            let pooled = fit_convolution_bound(&runs, lambda_under, fs.grid, fs.margin)?;
            aggregate.pooled_holdout_violations = Some(bound_violations(&pooled, &held).len());
            aggregate.pooled_fit = Some(pooled);
        }
    }
    Ok(SweepReport {
        config: cfg.clone(),
        plants,
        aggregate,
    })
}
