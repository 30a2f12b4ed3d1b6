use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::param_box::{check_assumption1, Assumption1Report, CoefficientBox};
use crate::model::plant::{to_predictor, PlantParameters, PredictorParameters};

/// `c(t) = offset + amplitude * cos(frequency * t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoefficientWave {
    pub offset: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

impl CoefficientWave {
    pub fn constant(c: f64) -> Self {
        Self {
            offset: c,
            amplitude: 0.0,
            frequency: 0.0,
            phase: 0.0,
        }
    }

    pub fn at(&self, t: i64) -> f64 {
        self.offset + self.amplitude * (self.frequency * t as f64 + self.phase).cos()
    }

    fn is_constant(&self) -> bool {
        self.amplitude == 0.0 || self.frequency == 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantSchedule {
    Constant {
        plant: PlantParameters,
    },
    Sinusoidal {
        d: usize,
        a: Vec<CoefficientWave>,
        b: Vec<CoefficientWave>,
    },
    /// `plants[k]` applies at `t_start + k`; the first and last entries are
    /// held outside the table.
    Tabulated {
        t_start: i64,
        plants: Vec<PlantParameters>,
    },
}

/// A plant whose coefficients may change every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlantSchedule", into = "PlantSchedule")]
pub struct TimeVaryingPlant {
    schedule: PlantSchedule,
    template: PlantParameters,
}

impl TryFrom<PlantSchedule> for TimeVaryingPlant {
    type Error = Error;

    fn try_from(s: PlantSchedule) -> Result<Self> {
        TimeVaryingPlant::new(s)
    }
}

impl From<TimeVaryingPlant> for PlantSchedule {
    fn from(p: TimeVaryingPlant) -> Self {
        p.schedule
    }
}

impl TimeVaryingPlant {
    pub fn new(schedule: PlantSchedule) -> Result<Self> {
        let template = match &schedule {
            PlantSchedule::Constant { plant } => plant.clone(),
            PlantSchedule::Sinusoidal { d, a, b } => PlantParameters::new(
                *d,
                a.iter().map(|w| w.offset).collect(),
                b.iter().map(|w| w.offset).collect(),
            )
            .or_else(|_| {
                // b_0 offset may be zero with a nonzero wave; orders are what matter here.
                PlantParameters::new(*d, vec![0.0; a.len()], vec![1.0; b.len().max(1)])
            })?,
            PlantSchedule::Tabulated { plants, .. } => {
                let first = plants
                    .first()
                    .ok_or_else(|| Error::InvalidPlant("empty plant table".into()))?;
                if plants.iter().any(|p| !p.same_orders(first)) {
                    return Err(Error::InvalidPlant(
                        "table entries differ in (n, m, d)".into(),
                    ));
                }
                first.clone()
            }
        };
        if let PlantSchedule::Sinusoidal { b, .. } = &schedule {
            if b.is_empty() {
                return Err(Error::InvalidPlant("b must contain at least b_0".into()));
            }
        }
        Ok(Self { schedule, template })
    }

    pub fn constant(plant: PlantParameters) -> Self {
        Self {
            template: plant.clone(),
            schedule: PlantSchedule::Constant { plant },
        }
    }

    pub fn schedule(&self) -> &PlantSchedule {
        &self.schedule
    }

    pub fn d(&self) -> usize {
        self.template.d()
    }

    pub fn n(&self) -> usize {
        self.template.n()
    }

    pub fn m(&self) -> usize {
        self.template.m()
    }

    pub fn dim(&self) -> usize {
        self.template.dim()
    }

    pub fn is_time_invariant(&self) -> bool {
        match &self.schedule {
            PlantSchedule::Constant { .. } => true,
            PlantSchedule::Sinusoidal { a, b, .. } => a.iter().chain(b).all(|w| w.is_constant()),
            PlantSchedule::Tabulated { plants, .. } => plants.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// Coefficients in force at time `t`.
    pub fn at(&self, t: i64) -> Result<PlantParameters> {
        match &self.schedule {
            PlantSchedule::Constant { plant } => Ok(plant.clone()),
            PlantSchedule::Sinusoidal { d, a, b } => PlantParameters::new(
                *d,
                a.iter().map(|w| w.at(t)).collect(),
                b.iter().map(|w| w.at(t)).collect(),
            ),
            PlantSchedule::Tabulated { t_start, plants } => {
                let k = (t - t_start).clamp(0, plants.len() as i64 - 1) as usize;
                Ok(plants[k].clone())
            }
        }
    }

    /// Predictor parameters of the plant in force at `t`.
    pub fn theta_star(&self, t: i64) -> Result<PredictorParameters> {
        to_predictor(&self.at(t)?)
    }

    /// Assumption 1 over `t0..=t1`, plus membership in `bounds` when given.
    pub fn validate(
        &self,
        t0: i64,
        t1: i64,
        bounds: Option<&CoefficientBox>,
    ) -> Result<Assumption1Report> {
        let plants = (t0..=t1).map(|t| self.at(t)).collect::<Result<Vec<_>>>()?;
        let mut report = check_assumption1(&plants);
        if let Some(cb) = bounds {
            for (i, p) in plants.iter().enumerate() {
                if !cb.contains(p) {
                    report.ok = false;
                    report
                        .violations
                        .push(crate::model::param_box::Assumption1Violation {
                            index: i,
                            reason: format!(
                                "coefficients at t = {} leave the declared box",
                                t0 + i as i64
                            ),
                        });
                }
            }
        }
        Ok(report)
    }
}
