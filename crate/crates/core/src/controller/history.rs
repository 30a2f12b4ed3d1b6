use std::collections::VecDeque;

use nalgebra::DVector;

use crate::model::InitialCondition;

/// Fixed-depth input/output history, newest sample at the front.
///
/// Holds `n + d` outputs and `m + 2d` inputs: enough to build `phi(t-d)` for
/// the estimator and the plant's delayed inputs, which is exactly the
/// initial condition plus the newest sample.
#[derive(Debug, Clone)]
pub struct RegressorHistory {
    n: usize,
    m: usize,
    d: usize,
    y: VecDeque<f64>,
    u: VecDeque<f64>,
}

impl RegressorHistory {
    pub fn new(n: usize, m: usize, d: usize, x0: &InitialCondition) -> Self {
        let mut y = VecDeque::with_capacity(n + d);
        let mut u = VecDeque::with_capacity(m + 2 * d);
        y.extend(x0.y_hist.iter().copied());
        u.extend(x0.u_hist.iter().copied());
        Self { n, m, d, y, u }
    }

    pub fn y_depth(&self) -> usize {
        self.n + self.d
    }

    pub fn u_depth(&self) -> usize {
        self.m + 2 * self.d
    }

    pub fn push_y(&mut self, v: f64) {
        self.y.push_front(v);
        self.y.truncate(self.y_depth());
    }

    pub fn push_u(&mut self, v: f64) {
        self.u.push_front(v);
        self.u.truncate(self.u_depth());
    }

    /// `k`-th most recent output (0 = newest). Missing entries read as zero,
    /// which only happens for `n = 0` where outputs never enter `phi`.
    pub fn y(&self, k: usize) -> f64 {
        self.y.get(k).copied().unwrap_or(0.0)
    }

    pub fn u(&self, k: usize) -> f64 {
        self.u.get(k).copied().unwrap_or(0.0)
    }

    /// Regressor whose newest output sits `y_lag` back and newest input
    /// `u_lag` back: `[y(..), .., u(..), ..]` with `n` outputs and `m + d`
    /// inputs.
    pub fn regressor(&self, y_lag: usize, u_lag: usize) -> DVector<f64> {
        let p = self.n + self.m + self.d;
        DVector::from_iterator(
            p,
            (0..self.n)
                .map(|i| self.y(y_lag + i))
                .chain((0..self.m + self.d).map(|i| self.u(u_lag + i))),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn depth_and_ordering() {
        // n = 2, m = 1, d = 2: x0 has 3 outputs and 4 inputs.
        let x0 = InitialCondition::new(2, 1, 2, vec![1.0, 2.0, 3.0], vec![10.0, 20.0, 30.0, 40.0])
            .unwrap();
        let mut h = RegressorHistory::new(2, 1, 2, &x0);
        assert_eq!(h.regressor(0, 0).as_slice(), &[1.0, 2.0, 10.0, 20.0, 30.0]);
        h.push_y(0.5);
        h.push_u(5.0);
        assert_eq!(h.y(0), 0.5);
        assert_eq!(h.y(3), 3.0);
        assert_eq!(h.u(4), 40.0);
        assert_eq!(h.regressor(0, 0).as_slice(), &[0.5, 1.0, 5.0, 10.0, 20.0]);
        for k in 0..10 {
            h.push_y(k as f64);
            h.push_u(k as f64);
        }
        assert_eq!(h.y.len(), 4);
        assert_eq!(h.u.len(), 5);
    }
}
