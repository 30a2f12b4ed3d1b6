use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reference and disturbance generators, evaluated at integer times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `amplitude * cos(frequency * t + phase)`.
    Cosine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// The cosine on `t_start < t <= t_end`, zero elsewhere.
    WindowedCosine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        t_start: i64,
        t_end: i64,
    },
    /// `amplitude` at `t`, zero elsewhere.
    Pulse {
        t: i64,
        amplitude: f64,
    },
    /// `values[k]` at `t_start + k`, zero outside.
    Samples {
        t_start: i64,
        values: Vec<f64>,
    },
}

impl Default for SignalSpec {
    fn default() -> Self {
        SignalSpec::Zero
    }
}

impl SignalSpec {
    pub fn value(&self, t: i64) -> f64 {
        match self {
            SignalSpec::Zero => 0.0,
            SignalSpec::Constant { value } => *value,
            SignalSpec::Cosine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t as f64 + phase).cos(),
            SignalSpec::WindowedCosine {
                amplitude,
                frequency,
                phase,
                t_start,
                t_end,
            } => {
                if *t_start < t && t <= *t_end {
                    amplitude * (frequency * t as f64 + phase).cos()
                } else {
                    0.0
                }
            }
            SignalSpec::Pulse { t: at, amplitude } => {
                if t == *at {
                    *amplitude
                } else {
                    0.0
                }
            }
            SignalSpec::Samples { t_start, values } => {
                let k = t - t_start;
                if k >= 0 && (k as usize) < values.len() {
                    values[k as usize]
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SignalSpec::Zero => true,
            SignalSpec::Constant { value } => *value == 0.0,
            SignalSpec::Cosine { amplitude, .. } | SignalSpec::WindowedCosine { amplitude, .. } => {
                *amplitude == 0.0
            }
            SignalSpec::Pulse { amplitude, .. } => *amplitude == 0.0,
            SignalSpec::Samples { values, .. } => values.iter().all(|v| *v == 0.0),
        }
    }

    /// `sup |signal|` over the whole time axis.
    pub fn sup_abs(&self) -> f64 {
        match self {
            SignalSpec::Zero => 0.0,
            SignalSpec::Constant { value } => value.abs(),
            SignalSpec::Cosine { amplitude, .. } | SignalSpec::WindowedCosine { amplitude, .. } => {
                amplitude.abs()
            }
            SignalSpec::Pulse { amplitude, .. } => amplitude.abs(),
            SignalSpec::Samples { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Sample-based signals must cover every time in `t0..=t1` explicitly.
    pub fn check_covers(&self, t0: i64, t1: i64) -> Result<()> {
        if let SignalSpec::Samples { t_start, values } = self {
            let t_last = t_start + values.len() as i64 - 1;
            if *t_start > t0 || t_last < t1 {
                return Err(Error::InvalidSignal(format!(
                    "samples cover [{t_start}, {t_last}], need [{t0}, {t1}]"
                )));
            }
        }
        Ok(())
    }

    pub fn check_finite(&self) -> Result<()> {
        let ok = match self {
            SignalSpec::Zero => true,
            SignalSpec::Constant { value } => value.is_finite(),
            SignalSpec::Cosine {
                amplitude,
                frequency,
                phase,
            }
            | SignalSpec::WindowedCosine {
                amplitude,
                frequency,
                phase,
                ..
            } => amplitude.is_finite() && frequency.is_finite() && phase.is_finite(),
            SignalSpec::Pulse { amplitude, .. } => amplitude.is_finite(),
            SignalSpec::Samples { values, .. } => values.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSignal("non-finite signal parameter".into()))
        }
    }
}
