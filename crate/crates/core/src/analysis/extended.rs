use nalgebra::{DMatrix, DVector};

use crate::analysis::decomposition::ErrorDecomposition;
use crate::analysis::good::GoodModel;
use crate::controller::SimulationTrace;
use crate::error::{Error, Result};

/// Stacked state `phi_bar(t) = [phi(t); ..; phi(t-d+1)]` with
/// `phi_bar(t+1) = (A_nom + Delta(t)) phi_bar(t) + B_bar_1 eta(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedSystem {
    pub a_nom: DMatrix<f64>,
    pub b_bar1: DMatrix<f64>,
    p: usize,
    d: usize,
}

impl ExtendedSystem {
    pub fn new(good: &GoodModel) -> Self {
        let p = good.dim();
        let d = good.plant().d();
        let mut a_nom = DMatrix::zeros(p * d, p * d);
        a_nom.view_mut((0, 0), (p, p)).copy_from(&good.a_g);
        for k in 1..d {
            a_nom
                .view_mut((k * p, (k - 1) * p), (p, p))
                .fill_with_identity();
        }
        let mut b_bar1 = DMatrix::zeros(p * d, p);
        b_bar1.view_mut((0, 0), (p, p)).fill_with_identity();
        Self {
            a_nom,
            b_bar1,
            p,
            d,
        }
    }

    pub fn dim(&self) -> usize {
        self.p * self.d
    }

    /// `Delta(t)`: the `Delta_j(t)` side by side in the first block row.
    pub fn delta_block(&self, deltas: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
        if deltas.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: deltas.len(),
            });
        }
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for (j, dj) in deltas.iter().enumerate() {
            out.view_mut((0, j * self.p), (self.p, self.p))
                .copy_from(dj);
        }
        Ok(out)
    }

    pub fn step_matrix(&self, dec: &ErrorDecomposition) -> Result<DMatrix<f64>> {
        Ok(&self.a_nom + self.delta_block(&dec.deltas)?)
    }

    pub fn phi_bar(&self, trace: &SimulationTrace, t: i64) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.dim());
        for k in 0..self.d {
            out.rows_mut(k * self.p, self.p)
                .copy_from(&trace.phi(t - k as i64)?);
        }
        Ok(out)
    }

    /// Residual and magnitude of the stacked recursion at `dec.t`.
    pub fn residual(
        &self,
        trace: &SimulationTrace,
        dec: &ErrorDecomposition,
    ) -> Result<(f64, f64)> {
        let m = self.step_matrix(dec)?;
        let now = self.phi_bar(trace, dec.t)?;
        let next = self.phi_bar(trace, dec.t + 1)?;
        let drive = &self.b_bar1 * &dec.eta;
        let pred = &m * &now + &drive;
        let mag = next.norm() + super::spectral_norm(&m) * now.norm() + drive.norm();
        Ok(((next - pred).norm(), mag))
    }
}
