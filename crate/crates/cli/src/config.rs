//! Experiment configuration: a single JSON document describing the plant,
//! the box, the estimator, the signals, the initial history and the horizon.

use std::fs;
use std::path::Path;

use dstep_core::controller::{SignalSpec, Simulation};
use dstep_core::estimator::{Deadzone, EstimatorConfig};
use dstep_core::model::{CoefficientBox, InitialCondition, ParameterBox, TimeVaryingPlant};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::seeding::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Theta0Spec {
    Midpoint,
    Explicit {
        value: Vec<f64>,
    },
    /// Uniform in the box, from the configured seed.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum X0Spec {
    Zero,
    /// Most recent sample first.
    Explicit {
        y_hist: Vec<f64>,
        u_hist: Vec<f64>,
    },
    /// Random direction with unit norm.
    RandomUnit,
    /// Unit-norm history produced by the plant at `t0` itself.
    ConsistentRandom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default)]
    pub delta: Deadzone,
    pub theta0: Theta0Spec,
    #[serde(default)]
    pub min_phi_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub plant: TimeVaryingPlant,
    /// Declared coefficient bounds; when present every plant in the run
    /// must lie inside and be minimum phase.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficient_box: Option<CoefficientBox>,
    pub parameter_box: ParameterBox,
    pub estimator: EstimatorSpec,
    pub reference: SignalSpec,
    pub disturbance: SignalSpec,
    pub x0: X0Spec,
    pub t0: i64,
    pub horizon: i64,
    #[serde(default)]
    pub seed: u64,
}

/// A configuration with every random choice made.
#[derive(Debug, Clone)]
pub struct ResolvedExperiment {
    pub config: ExperimentConfig,
    pub sim: Simulation,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path.as_ref()).map_err(|e| CliError::io(path.as_ref(), e))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path.as_ref(), self.to_json()? + "\n").map_err(|e| CliError::io(path.as_ref(), e))
    }

    pub fn with_overrides(mut self, seed: Option<u64>, horizon: Option<i64>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(h) = horizon {
            self.horizon = h;
        }
        self
    }

    /// Checks dimensions and draws any random initial values.
    pub fn resolve(&self) -> Result<ResolvedExperiment> {
        let plant = &self.plant;
        let (n, m, d) = (plant.n(), plant.m(), plant.d());
        let pbox = &self.parameter_box;
        if pbox.dim() != plant.dim() {
            return Err(CliError::Config(format!(
                "parameter box has dimension {}, plant needs n + m + d = {}",
                pbox.dim(),
                plant.dim()
            )));
        }
        if pbox.beta0_index() != n {
            return Err(CliError::Config(format!(
                "beta_0 sits at index {} in the box but at {n} in the regressor",
                pbox.beta0_index()
            )));
        }
        if self.horizon <= self.t0 {
            return Err(CliError::Config(format!(
                "horizon {} must exceed t0 = {}",
                self.horizon, self.t0
            )));
        }
        if let Some(cb) = &self.coefficient_box {
            let report = plant.validate(self.t0, self.horizon + d as i64 + 1, Some(cb))?;
            if !report.ok {
                let first = report
                    .violations
                    .first()
                    .map(|v| v.reason.clone())
                    .unwrap_or_default();
                return Err(CliError::Config(format!(
                    "plant schedule fails the box check: {first}"
                )));
            }
        }
        if !(self.estimator.min_phi_norm >= 0.0) {
            return Err(CliError::Config("min_phi_norm must be non-negative".into()));
        }

        let mut rng = stream_rng(self.seed, Stream::Initial, 0, 0);
        let theta0 = match &self.estimator.theta0 {
            Theta0Spec::Midpoint => pbox.midpoint(),
            Theta0Spec::Explicit { value } => {
                if value.len() != pbox.dim() {
                    return Err(CliError::Config(format!(
                        "theta0 has {} entries, expected {}",
                        value.len(),
                        pbox.dim()
                    )));
                }
                DVector::from_vec(value.clone())
            }
            Theta0Spec::Random => pbox.sample(&mut rng),
        };
        let x0 = match &self.x0 {
            X0Spec::Zero => InitialCondition::zero(n, m, d),
            X0Spec::Explicit { y_hist, u_hist } => {
                InitialCondition::new(n, m, d, y_hist.clone(), u_hist.clone()).map_err(|e| {
                    CliError::Config(format!(
                        "x0 needs {} outputs and {} inputs: {e}",
                        InitialCondition::y_len(n, d),
                        InitialCondition::u_len(m, d)
                    ))
                })?
            }
            X0Spec::RandomUnit => InitialCondition::random_unit(n, m, d, &mut rng),
            X0Spec::ConsistentRandom => {
                InitialCondition::consistent_random(&plant.at(self.t0)?, &mut rng)
            }
        };
        let estimator = EstimatorConfig::new(pbox.clone(), theta0)?
            .with_delta(self.estimator.delta)
            .with_min_phi_norm(self.estimator.min_phi_norm);
        let sim = Simulation {
            plant: plant.clone(),
            estimator,
            reference: self.reference.clone(),
            disturbance: self.disturbance.clone(),
            x0,
            t0: self.t0,
            horizon: self.horizon,
        };
        sim.validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        Ok(ResolvedExperiment {
            config: self.clone(),
            sim,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use dstep_core::model::PlantParameters;

    fn small() -> ExperimentConfig {
        let plant = PlantParameters::new(1, vec![0.5], vec![1.0, 0.2]).unwrap();
        ExperimentConfig {
            plant: TimeVaryingPlant::constant(plant),
            coefficient_box: None,
            parameter_box: ParameterBox::new(vec![-1.0, 0.5, -1.0], vec![1.0, 2.0, 1.0], 1)
                .unwrap(),
            estimator: EstimatorSpec {
                delta: Deadzone::Finite(0.25),
                theta0: Theta0Spec::Random,
                min_phi_norm: 0.0,
            },
            reference: SignalSpec::Cosine {
                amplitude: 1.0,
                frequency: 0.1,
                phase: 0.3,
            },
            disturbance: SignalSpec::Zero,
            x0: X0Spec::RandomUnit,
            t0: 0,
            horizon: 20,
            seed: 11,
        }
    }

    #[test]
    fn json_round_trip_is_lossless() {
        let cfg = small();
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn resolve_is_seeded() {
        let a = small().resolve().unwrap();
        let b = small().resolve().unwrap();
        assert_eq!(a.sim.x0, b.sim.x0);
        assert_eq!(a.sim.estimator.theta0(), b.sim.estimator.theta0());
        let c = small().with_overrides(Some(12), None).resolve().unwrap();
        assert_ne!(a.sim.x0, c.sim.x0);
    }

    #[test]
    fn dimension_mismatch_is_a_config_error() {
        let mut cfg = small();
        cfg.parameter_box = ParameterBox::new(vec![0.5], vec![2.0], 0).unwrap();
        assert!(matches!(cfg.resolve(), Err(CliError::Config(_))));
        let mut cfg = small();
        cfg.x0 = X0Spec::Explicit {
            y_hist: vec![1.0, 2.0],
            u_hist: vec![0.0],
        };
        assert!(matches!(cfg.resolve(), Err(CliError::Config(_))));
    }

    #[test]
    fn straddling_beta0_box_is_rejected_at_load() {
        let mut v: serde_json::Value = serde_json::from_str(&small().to_json().unwrap()).unwrap();
        v["parameter_box"]["lower"][1] = serde_json::json!(-0.5);
        assert!(ExperimentConfig::from_json(&v.to_string()).is_err());
    }
}
