use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{long_division, Polynomial};

/// Plant `sum a_i y(t-i) = sum b_i u(t-d-i) + w(t)` with `a_0 = 1` implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPlant", into = "RawPlant")]
pub struct PlantParameters {
    d: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPlant {
    d: usize,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl TryFrom<RawPlant> for PlantParameters {
    type Error = Error;

    fn try_from(raw: RawPlant) -> Result<Self> {
        PlantParameters::new(raw.d, raw.a, raw.b)
    }
}

impl From<PlantParameters> for RawPlant {
    fn from(p: PlantParameters) -> Self {
        RawPlant {
            d: p.d,
            a: p.a,
            b: p.b,
        }
    }
}

impl PlantParameters {
    /// `a` holds `a_1..a_n`, `b` holds `b_0..b_m`.
    pub fn new(d: usize, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if d < 1 {
            return Err(Error::ZeroDelay);
        }
        match b.first() {
            None => return Err(Error::InvalidPlant("b must contain at least b_0".into())),
            Some(&b0) if b0 == 0.0 => return Err(Error::ZeroLeadingCoefficient),
            _ => {}
        }
        if a.iter().chain(&b).any(|c| !c.is_finite()) {
            return Err(Error::InvalidPlant("non-finite coefficient".into()));
        }
        Ok(Self { d, a, b })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.a.len()
    }

    pub fn m(&self) -> usize {
        self.b.len() - 1
    }

    /// Regressor dimension `n + m + d`.
    pub fn dim(&self) -> usize {
        self.n() + self.m() + self.d
    }

    /// `a_1..a_n`.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// `b_0..b_m`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    /// `a_i` for any `i >= 0`, with `a_0 = 1` and zero past `n`.
    pub fn a_coeff(&self, i: usize) -> f64 {
        match i {
            0 => 1.0,
            i => self.a.get(i - 1).copied().unwrap_or(0.0),
        }
    }

    pub fn b_coeff(&self, i: usize) -> f64 {
        self.b.get(i).copied().unwrap_or(0.0)
    }

    pub fn a_poly(&self) -> Polynomial {
        let mut c = vec![1.0];
        c.extend_from_slice(&self.a);
        Polynomial::new(c).expect("nonempty")
    }

    pub fn b_poly(&self) -> Polynomial {
        Polynomial::new(self.b.clone()).expect("nonempty")
    }

    /// The coefficient list `[a_1 .. a_n, b_0 .. b_m]`.
    pub fn coefficient_vector(&self) -> Vec<f64> {
        self.a.iter().chain(&self.b).copied().collect()
    }

    pub fn same_orders(&self, other: &PlantParameters) -> bool {
        self.d == other.d && self.n() == other.n() && self.m() == other.m()
    }
}

/// `theta* = (alpha_0..alpha_{n-1}, beta_0..beta_{m+d-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParameters {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl PredictorParameters {
    pub fn dim(&self) -> usize {
        self.alpha.len() + self.beta.len()
    }

    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(self.dim(), self.alpha.iter().chain(&self.beta).copied())
    }

    pub fn from_vector(n: usize, theta: &DVector<f64>) -> Self {
        Self {
            alpha: theta.rows(0, n).iter().copied().collect(),
            beta: theta.rows(n, theta.len() - n).iter().copied().collect(),
        }
    }

    /// Maps back to `(a_1..a_n, b_0..b_m)`; only meaningful when `d = 1`,
    /// where `alpha_i = -a_{i+1}` and `beta = b`.
    pub fn to_plant_d1(&self) -> Result<PlantParameters> {
        PlantParameters::new(
            1,
            self.alpha.iter().map(|a| -a).collect(),
            self.beta.clone(),
        )
    }
}

/// Predictor form together with the `F` polynomial that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorForm {
    pub theta: PredictorParameters,
    pub f: Polynomial,
}

pub fn predictor_form(p: &PlantParameters) -> Result<PredictorForm> {
    let (f, g) = long_division(&p.a_poly(), p.d)?;
    let n = p.n();
    let alpha = g.resized(n.max(1)).coeffs()[..n].to_vec();
    let beta = f.mul(&p.b_poly()).resized(p.m() + p.d).into_coeffs();
    Ok(PredictorForm {
        theta: PredictorParameters { alpha, beta },
        f,
    })
}

pub fn to_predictor(p: &PlantParameters) -> Result<PredictorParameters> {
    Ok(predictor_form(p)?.theta)
}

/// One step of the plant recursion.
///
/// `y_past` holds `y(t-1), .., y(t-n)`; `u_delayed` holds `u(t-d), .., u(t-d-m)`.
pub fn plant_step(p: &PlantParameters, y_past: &[f64], u_delayed: &[f64], w: f64) -> Result<f64> {
    if y_past.len() < p.n() {
        return Err(Error::InsufficientHistory(format!(
            "need {} past outputs, have {}",
            p.n(),
            y_past.len()
        )));
    }
    if u_delayed.len() < p.m() + 1 {
        return Err(Error::InsufficientHistory(format!(
            "need {} delayed inputs, have {}",
            p.m() + 1,
            u_delayed.len()
        )));
    }
    let ar: f64 = p.a.iter().zip(y_past).map(|(a, y)| a * y).sum();
    let ma: f64 = p.b.iter().zip(u_delayed).map(|(b, u)| b * u).sum();
    Ok(-ar + ma + w)
}

/// `y(t+d) = phi(t)^T theta* + wbar(t)`.
pub fn predictor_step(theta: &DVector<f64>, phi: &DVector<f64>, wbar: f64) -> Result<f64> {
    if theta.len() != phi.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            got: phi.len(),
        });
    }
    Ok(phi.dot(theta) + wbar)
}

/// `wbar(t) = f_0 w(t+d) + .. + f_{d-1} w(t+1)`, with `d` the length of `f`.
pub fn wbar(f: &Polynomial, w: impl Fn(i64) -> f64, t: i64) -> f64 {
    let d = f.coeffs().len() as i64;
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, fi)| fi * w(t + d - i as i64))
        .sum()
}

/// Runs the plant open loop from rest under `u` and `w` and returns the
/// largest gap between `y(t+d)` and its predictor-form value
/// `phi(t)^T theta* + wbar(t)`.
pub fn predictor_gap(p: &PlantParameters, u: &[f64], w: &[f64]) -> Result<f64> {
    if u.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            got: w.len(),
        });
    }
    let (n, m, d) = (p.n(), p.m(), p.d());
    let at = |v: &[f64], t: i64| {
        if t >= 0 && (t as usize) < v.len() {
            v[t as usize]
        } else {
            0.0
        }
    };
    let mut y = vec![0.0; u.len()];
    for t in 0..u.len() {
        let ti = t as i64;
        let y_past: Vec<f64> = (1..=n).map(|i| at(&y, ti - i as i64)).collect();
        let u_del: Vec<f64> = (0..=m).map(|i| at(u, ti - (d + i) as i64)).collect();
        y[t] = plant_step(p, &y_past, &u_del, w[t])?;
    }
    let form = predictor_form(p)?;
    let theta = form.theta.to_vector();
    let mut gap: f64 = 0.0;
    for t in 0..u.len().saturating_sub(d) {
        let ti = t as i64;
        let phi = DVector::from_iterator(
            n + m + d,
            (0..n)
                .map(|i| at(&y, ti - i as i64))
                .chain((0..m + d).map(|i| at(u, ti - i as i64))),
        );
        let pred = predictor_step(&theta, &phi, wbar(&form.f, |s| at(w, s), ti))?;
        gap = gap.max((y[t + d] - pred).abs());
    }
    Ok(gap)
}

/// Plant state at the start of adaptation, most recent sample first:
/// `y(t0-1) .. y(t0-n-d+1)` and `u(t0-1) .. u(t0-m-2d+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub y_hist: Vec<f64>,
    pub u_hist: Vec<f64>,
}

impl InitialCondition {
    pub fn y_len(n: usize, d: usize) -> usize {
        n + d - 1
    }

    pub fn u_len(m: usize, d: usize) -> usize {
        m + 2 * d - 1
    }

    pub fn new(n: usize, m: usize, d: usize, y_hist: Vec<f64>, u_hist: Vec<f64>) -> Result<Self> {
        let x0 = Self { y_hist, u_hist };
        x0.check(n, m, d)?;
        Ok(x0)
    }

    pub fn check(&self, n: usize, m: usize, d: usize) -> Result<()> {
        if d < 1 {
            return Err(Error::ZeroDelay);
        }
        if self.y_hist.len() != Self::y_len(n, d) {
            return Err(Error::DimensionMismatch {
                expected: Self::y_len(n, d),
                got: self.y_hist.len(),
            });
        }
        if self.u_hist.len() != Self::u_len(m, d) {
            return Err(Error::DimensionMismatch {
                expected: Self::u_len(m, d),
                got: self.u_hist.len(),
            });
        }
        Ok(())
    }

    pub fn zero(n: usize, m: usize, d: usize) -> Self {
        Self {
            y_hist: vec![0.0; Self::y_len(n, d)],
            u_hist: vec![0.0; Self::u_len(m, d)],
        }
    }

    pub fn norm(&self) -> f64 {
        self.y_hist
            .iter()
            .chain(&self.u_hist)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            y_hist: self.y_hist.iter().map(|v| v * s).collect(),
            u_hist: self.u_hist.iter().map(|v| v * s).collect(),
        }
    }

    /// Random direction scaled to unit norm. Entries are drawn independently,
    /// so the direction is not uniform on the sphere.
    pub fn random_unit<R: Rng + ?Sized>(n: usize, m: usize, d: usize, rng: &mut R) -> Self {
        loop {
            let x = Self {
                y_hist: (0..Self::y_len(n, d))
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
                u_hist: (0..Self::u_len(m, d))
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect(),
            };
            let nrm = x.norm();
            if nrm > 1e-3 {
                return x.scaled(1.0 / nrm);
            }
        }
    }

    /// Unit-norm history generated by running the plant itself under random
    /// input and zero disturbance, so the plant equation holds across the
    /// whole window. With `d > 1` this is what makes the predictor relation
    /// exact from the first adaptive step.
    pub fn consistent_random<R: Rng + ?Sized>(p: &PlantParameters, rng: &mut R) -> Self {
        let (n, m, d) = (p.n(), p.m(), p.d());
        let ny = Self::y_len(n, d);
        let nu = Self::u_len(m, d);
        let warm = 2 * (ny + nu) + 4;
        let total = warm + nu;
        loop {
            let u: Vec<f64> = (0..total).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut y = vec![0.0; total];
            for t in 0..total {
                let y_past: Vec<f64> = (1..=n)
                    .map(|i| if t >= i { y[t - i] } else { 0.0 })
                    .collect();
                let u_del: Vec<f64> = (0..=m)
                    .map(|i| if t >= d + i { u[t - d - i] } else { 0.0 })
                    .collect();
                y[t] = plant_step(p, &y_past, &u_del, 0.0).expect("history sized above");
            }
            // t0 = total: most recent first.
            let x = Self {
                y_hist: (1..=ny).map(|k| y[total - k]).collect(),
                u_hist: (1..=nu).map(|k| u[total - k]).collect(),
            };
            let nrm = x.norm();
            if nrm.is_finite() && nrm > 1e-6 {
                return x.scaled(1.0 / nrm);
            }
        }
    }

    /// Residual of the plant equation at each pre-`t0` time the window fully
    /// determines, `t0-d+1 .. t0-1`.
    pub fn plant_residuals(&self, p: &PlantParameters) -> Vec<f64> {
        let (n, m, d) = (p.n(), p.m(), p.d());
        // k steps before t0, k = 1..d-1
        (1..d)
            .map(|k| {
                let y_at = |lag: usize| self.y_hist[lag - 1];
                let u_at = |lag: usize| self.u_hist[lag - 1];
                let lhs: f64 = y_at(k) + (1..=n).map(|i| p.a_coeff(i) * y_at(k + i)).sum::<f64>();
                let rhs: f64 = (0..=m).map(|i| p.b_coeff(i) * u_at(k + d + i)).sum();
                lhs - rhs
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn plant_validation() {
        assert_eq!(
            PlantParameters::new(0, vec![], vec![1.0]),
            Err(Error::ZeroDelay)
        );
        assert_eq!(
            PlantParameters::new(1, vec![], vec![0.0, 1.0]),
            Err(Error::ZeroLeadingCoefficient)
        );
        assert!(PlantParameters::new(1, vec![], vec![]).is_err());
        let p = PlantParameters::new(2, vec![0.5, 0.1], vec![1.0, 0.2, 0.3]).unwrap();
        assert_eq!((p.n(), p.m(), p.d(), p.dim()), (2, 2, 2, 6));
    }

    #[test]
    fn predictor_examples() {
        let p = PlantParameters::new(1, vec![0.3, -0.2], vec![1.5, 0.4]).unwrap();
        let th = to_predictor(&p).unwrap();
        assert_eq!(th.alpha, vec![-0.3, 0.2]);
        assert_eq!(th.beta, vec![1.5, 0.4]);

        let p = PlantParameters::new(3, vec![0.0, 0.0], vec![2.0, 1.0]).unwrap();
        let th = to_predictor(&p).unwrap();
        assert_eq!(th.alpha, vec![0.0, 0.0]);
        assert_eq!(th.beta, vec![2.0, 1.0, 0.0, 0.0]);

        let p = PlantParameters::new(2, vec![0.5], vec![1.0]).unwrap();
        let form = predictor_form(&p).unwrap();
        assert_eq!(form.f.coeffs(), &[1.0, -0.5]);
        assert_eq!(form.theta.alpha, vec![0.25]);
        assert_eq!(form.theta.beta, vec![1.0, -0.5]);
    }

    #[test]
    fn beta0_equals_b0() {
        for d in 1..=4 {
            let p = PlantParameters::new(d, vec![0.7, -0.1, 0.3], vec![-1.7, 0.2]).unwrap();
            let th = to_predictor(&p).unwrap();
            assert_eq!(th.beta[0], -1.7);
            assert_eq!(th.beta.len(), p.m() + d);
            assert_eq!(th.alpha.len(), p.n());
        }
    }

    #[test]
    fn d1_round_trip() {
        let p = PlantParameters::new(1, vec![0.3, -0.2], vec![1.5, 0.4]).unwrap();
        assert_eq!(to_predictor(&p).unwrap().to_plant_d1().unwrap(), p);
    }

    #[test]
    fn plant_step_examples() {
        let p = PlantParameters::new(1, vec![0.5, 0.1], vec![1.0, 2.0]).unwrap();
        assert_eq!(plant_step(&p, &[0.0, 0.0], &[0.0, 0.0], 0.0).unwrap(), 0.0);
        let p = PlantParameters::new(1, vec![], vec![2.0]).unwrap();
        assert_eq!(plant_step(&p, &[], &[3.0], 1.0).unwrap(), 7.0);
        let p = PlantParameters::new(1, vec![0.5], vec![1.0]).unwrap();
        assert!(matches!(
            plant_step(&p, &[], &[1.0], 0.0),
            Err(Error::InsufficientHistory(_))
        ));
    }

    #[test]
    fn predictor_step_examples() {
        let th = DVector::from_vec(vec![0.4, 1.2, -0.3]);
        assert_eq!(predictor_step(&DVector::zeros(3), &th, 0.0).unwrap(), 0.0);
        let e1 = DVector::from_vec(vec![1.0, 0.0, 0.0]);
        assert_eq!(predictor_step(&th, &e1, 0.0).unwrap(), 0.4);
        assert!(predictor_step(&th, &DVector::zeros(2), 0.0).is_err());
    }

    #[test]
    fn wbar_examples() {
        let f1 = Polynomial::one();
        assert_eq!(wbar(&f1, |_| 0.0, 5), 0.0);
        assert_eq!(wbar(&f1, |t| t as f64, 5), 6.0);
        let f2 = Polynomial::new(vec![1.0, -0.5]).unwrap();
        assert_abs_diff_eq!(wbar(&f2, |_| 1.0, 3), 0.5);
    }

    #[test]
    fn initial_condition_lengths() {
        assert!(InitialCondition::new(2, 1, 2, vec![0.0; 3], vec![0.0; 4]).is_ok());
        assert!(InitialCondition::new(2, 1, 2, vec![0.0; 2], vec![0.0; 4]).is_err());
        let z = InitialCondition::zero(0, 0, 1);
        assert!(z.y_hist.is_empty());
        assert_eq!(z.u_hist.len(), 1);
    }

    #[test]
    fn consistent_history_satisfies_plant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = PlantParameters::new(3, vec![0.4, -0.3], vec![1.2, 0.5]).unwrap();
        let x0 = InitialCondition::consistent_random(&p, &mut rng);
        assert_abs_diff_eq!(x0.norm(), 1.0, epsilon = 1e-12);
        assert_eq!(x0.plant_residuals(&p).len(), 2);
        for r in x0.plant_residuals(&p) {
            assert!(r.abs() < 1e-12, "residual {r}");
        }
    }
}
