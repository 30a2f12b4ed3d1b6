use nalgebra::DMatrix;
use serde::Serialize;

use crate::analysis::decomposition::{decompose_error, DecompositionContext};
use crate::analysis::extended::ExtendedSystem;
use crate::analysis::spectral_norm;
use crate::error::{Error, Result};

/// Envelope `||Phi(tau+k, tau)|| <= gamma mu^k` over a window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayFit {
    pub gamma: f64,
    pub mu: f64,
    /// `M_k = max_tau ||Phi(tau+k, tau)||`, with `M_0 = 1`.
    pub max_norms: Vec<f64>,
}

impl DecayFit {
    pub fn envelope(&self, k: usize) -> f64 {
        self.gamma * self.mu.powi(k as i32)
    }
}

/// Fits the transition-matrix envelope of the sequence `steps[i]`, i.e. of
/// the products `steps[tau+k-1] .. steps[tau]` for spans up to `max_span`.
///
/// `mu` is the slope of the last edge of the upper hull of `log M_k`, and
/// `gamma` the smallest factor making `gamma mu^k >= M_k` for every `k`.
pub fn transition_decay(steps: &[DMatrix<f64>], max_span: usize) -> Result<DecayFit> {
    if steps.is_empty() || max_span == 0 {
        return Err(Error::Invalid("empty decay window".into()));
    }
    let dim = steps[0].nrows();
    let span = max_span.min(steps.len());
    let mut max_norms = vec![0.0; span + 1];
    max_norms[0] = 1.0;
    for tau in 0..steps.len() {
        let mut prod = DMatrix::<f64>::identity(dim, dim);
        for k in 1..=span.min(steps.len() - tau) {
            prod = &steps[tau + k - 1] * prod;
            let nrm = spectral_norm(&prod);
            if !nrm.is_finite() {
                return Err(Error::NonFinite {
                    what: "transition matrix",
                    t: (tau + k) as i64,
                    value: nrm,
                });
            }
            max_norms[k] = f64::max(max_norms[k], nrm);
        }
    }
    let last = max_norms.iter().rposition(|m| *m > 0.0).unwrap_or(0);
    if last == 0 {
        return Ok(DecayFit {
            gamma: 1.0,
            mu: 0.0,
            max_norms,
        });
    }
    let log_last = max_norms[last].ln();
    let slope = (0..last)
        .map(|k| (log_last - max_norms[k].ln()) / (last - k) as f64)
        .fold(f64::INFINITY, f64::min);
    let mu = slope.exp();
    let gamma = (0..=last)
        .map(|k| max_norms[k] / mu.powi(k as i32))
        .fold(0.0, f64::max);
    Ok(DecayFit {
        gamma,
        mu,
        max_norms,
    })
}

/// Transition decay of the stacked loop over `t_start ..= t_end`, using the
/// decomposition at each step.
pub fn transition_decay_from_trace(
    ctx: &DecompositionContext<'_>,
    window: (i64, i64),
    max_span: usize,
) -> Result<DecayFit> {
    let ext = ExtendedSystem::new(ctx.good);
    let steps = (window.0..=window.1)
        .map(|t| ext.step_matrix(&decompose_error(ctx, t)?))
        .collect::<Result<Vec<_>>>()?;
    transition_decay(&steps, max_span)
}
