use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::plant::PlantParameters;
use crate::poly::max_zero_magnitude;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn of(x: f64) -> Option<Sign> {
        if x > 0.0 {
            Some(Sign::Positive)
        } else if x < 0.0 {
            Some(Sign::Negative)
        } else {
            None
        }
    }
}

/// Axis-aligned box of admissible predictor parameters. The coordinate at
/// `beta0_index` (which equals `n`) holds `beta_0` and its interval must not
/// contain zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox", into = "RawBox")]
pub struct ParameterBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    beta0_index: usize,
    sign: Sign,
    norm: f64,
}

#[derive(Serialize, Deserialize)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    beta0_index: usize,
}

impl TryFrom<RawBox> for ParameterBox {
    type Error = Error;

    fn try_from(raw: RawBox) -> Result<Self> {
        ParameterBox::new(raw.lower, raw.upper, raw.beta0_index)
    }
}

impl From<ParameterBox> for RawBox {
    fn from(b: ParameterBox) -> Self {
        RawBox {
            lower: b.lower,
            upper: b.upper,
            beta0_index: b.beta0_index,
        }
    }
}

impl ParameterBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, beta0_index: usize) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if beta0_index >= lower.len() {
            return Err(Error::InvalidBox(format!(
                "beta_0 index {beta0_index} outside dimension {}",
                lower.len()
            )));
        }
        for (i, (lo, hi)) in lower.iter().zip(&upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidBox(format!("coordinate {i}: [{lo}, {hi}]")));
            }
        }
        let (lo, hi) = (lower[beta0_index], upper[beta0_index]);
        let sign = match (Sign::of(lo), Sign::of(hi)) {
            (Some(a), Some(b)) if a == b => a,
            _ => {
                return Err(Error::InvalidBox(format!(
                    "beta_0 interval [{lo}, {hi}] must exclude zero"
                )))
            }
        };
        let norm = lower
            .iter()
            .zip(&upper)
            .map(|(l, u)| l.abs().max(u.abs()).powi(2))
            .sum::<f64>()
            .sqrt();
        Ok(Self {
            lower,
            upper,
            beta0_index,
            sign,
            norm,
        })
    }

    /// Box `center_i +- max(abs_margin, rel_margin |center_i|)`, with the
    /// `beta_0` interval shrunk if needed so it keeps the sign of `center`.
    pub fn around(
        center: &DVector<f64>,
        beta0_index: usize,
        rel_margin: f64,
        abs_margin: f64,
    ) -> Result<Self> {
        let mut lower = Vec::with_capacity(center.len());
        let mut upper = Vec::with_capacity(center.len());
        for (i, &c) in center.iter().enumerate() {
            let mut r = abs_margin.max(rel_margin * c.abs());
            if i == beta0_index {
                r = r.min(0.5 * c.abs());
            }
            lower.push(c - r);
            upper.push(c + r);
        }
        Self::new(lower, upper, beta0_index)
    }

    /// The single-point box `{theta}`; projection onto it freezes the estimate.
    pub fn point(theta: &DVector<f64>, beta0_index: usize) -> Result<Self> {
        Self::new(
            theta.iter().copied().collect(),
            theta.iter().copied().collect(),
            beta0_index,
        )
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn beta0_index(&self) -> usize {
        self.beta0_index
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    /// `max_{x in S} ||x||`, attained at the corner of largest magnitudes.
    pub fn norm(&self) -> f64 {
        self.norm
    }

    /// Smallest `|beta_0|` over the box.
    pub fn beta0_floor(&self) -> f64 {
        let (lo, hi) = (self.lower[self.beta0_index], self.upper[self.beta0_index]);
        lo.abs().min(hi.abs())
    }

    pub fn midpoint(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| 0.5 * (l + u)),
        )
    }

    pub fn contains(&self, theta: &DVector<f64>, tol: f64) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(x, (l, u))| *x >= l - tol && *x <= u + tol)
    }

    /// Euclidean projection: a per-coordinate clamp.
    pub fn project(&self, theta: &DVector<f64>) -> Result<DVector<f64>> {
        if theta.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: theta.len(),
            });
        }
        Ok(DVector::from_iterator(
            self.dim(),
            theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .map(|(x, (l, u))| x.clamp(*l, *u)),
        ))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lower.iter().zip(&self.upper).map(|(&l, &u)| {
                if l == u {
                    l
                } else {
                    rng.random_range(l..=u)
                }
            }),
        )
    }
}

pub fn project_onto_box(theta: &DVector<f64>, s: &ParameterBox) -> Result<DVector<f64>> {
    s.project(theta)
}

pub fn box_norm(s: &ParameterBox) -> f64 {
    s.norm()
}

/// Interval box over the original plant coefficients `(a_1..a_n, b_0..b_m)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientBox {
    pub d: usize,
    pub a: Vec<[f64; 2]>,
    pub b: Vec<[f64; 2]>,
}

impl CoefficientBox {
    pub fn validate(&self) -> Result<()> {
        if self.d < 1 {
            return Err(Error::ZeroDelay);
        }
        if self.b.is_empty() {
            return Err(Error::InvalidBox("b intervals must include b_0".into()));
        }
        for [lo, hi] in self.a.iter().chain(&self.b) {
            if !(lo.is_finite() && hi.is_finite()) || lo > hi {
                return Err(Error::InvalidBox(format!("interval [{lo}, {hi}]")));
            }
        }
        let [lo, hi] = self.b[0];
        match (Sign::of(lo), Sign::of(hi)) {
            (Some(a), Some(b)) if a == b => Ok(()),
            _ => Err(Error::InvalidBox(format!(
                "b_0 interval [{lo}, {hi}] must exclude zero"
            ))),
        }
    }

    fn intervals(&self) -> impl Iterator<Item = &[f64; 2]> {
        self.a.iter().chain(&self.b)
    }

    fn plant_from(&self, coeffs: Vec<f64>) -> Result<PlantParameters> {
        let n = self.a.len();
        PlantParameters::new(self.d, coeffs[..n].to_vec(), coeffs[n..].to_vec())
    }

    pub fn midpoint(&self) -> Result<PlantParameters> {
        self.plant_from(self.intervals().map(|[l, u]| 0.5 * (l + u)).collect())
    }

    pub fn contains(&self, p: &PlantParameters) -> bool {
        p.d() == self.d
            && p.n() == self.a.len()
            && p.b().len() == self.b.len()
            && p.coefficient_vector()
                .iter()
                .zip(self.intervals())
                .all(|(x, [l, u])| *x >= *l && *x <= *u)
    }

    /// All `2^(n+m+1)` vertices.
    pub fn corners(&self) -> Result<Vec<PlantParameters>> {
        let iv: Vec<&[f64; 2]> = self.intervals().collect();
        let k = iv.len();
        if k > 20 {
            return Err(Error::Invalid(format!(
                "too many coordinates ({k}) to enumerate corners"
            )));
        }
        (0..(1usize << k))
            .map(|mask| {
                let c = iv
                    .iter()
                    .enumerate()
                    .map(|(i, [l, u])| if mask >> i & 1 == 1 { *u } else { *l })
                    .collect();
                self.plant_from(c)
            })
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<PlantParameters> {
        self.plant_from(
            self.intervals()
                .map(|&[l, u]| if l == u { l } else { rng.random_range(l..=u) })
                .collect(),
        )
    }

    /// For `d = 1` the predictor parameters are `(-a_1..-a_n, b_0..b_m)`, so
    /// the coefficient box maps to a box exactly.
    pub fn to_parameter_box_d1(&self) -> Result<ParameterBox> {
        if self.d != 1 {
            return Err(Error::InvalidBox(
                "coefficient boxes map to predictor boxes only for d = 1".into(),
            ));
        }
        let lower = self
            .a
            .iter()
            .map(|[_, u]| -u)
            .chain(self.b.iter().map(|[l, _]| *l))
            .collect();
        let upper = self
            .a
            .iter()
            .map(|[l, _]| -l)
            .chain(self.b.iter().map(|[_, u]| *u))
            .collect();
        ParameterBox::new(lower, upper, self.a.len())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption1Violation {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assumption1Report {
    pub ok: bool,
    /// Largest zero magnitude over the sample: a lower estimate of the
    /// worst case over the whole admissible set.
    pub lambda_under: f64,
    pub samples: usize,
    pub violations: Vec<Assumption1Violation>,
}

/// Minimum-phase and constant-sign-`b_0` check over a sample of plants.
pub fn check_assumption1(plants: &[PlantParameters]) -> Assumption1Report {
    let mut violations = Vec::new();
    let mut lambda_under: f64 = 0.0;
    let reference_sign = plants.first().and_then(|p| Sign::of(p.b()[0]));
    for (index, p) in plants.iter().enumerate() {
        match max_zero_magnitude(&p.b_poly()) {
            Ok(r) => {
                lambda_under = lambda_under.max(r);
                if r >= 1.0 {
                    violations.push(Assumption1Violation {
                        index,
                        reason: format!("zero of magnitude {r} outside the open unit disk"),
                    });
                }
            }
            Err(e) => violations.push(Assumption1Violation {
                index,
                reason: e.to_string(),
            }),
        }
        if Sign::of(p.b()[0]) != reference_sign {
            violations.push(Assumption1Violation {
                index,
                reason: format!("b_0 = {} changes sign", p.b()[0]),
            });
        }
    }
    Assumption1Report {
        ok: violations.is_empty() && !plants.is_empty(),
        lambda_under,
        samples: plants.len(),
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sec5_coefficients() -> CoefficientBox {
        CoefficientBox {
            d: 1,
            a: vec![[-2.0, 2.0], [-2.0, 2.0]],
            b: vec![[1.5, 5.0], [-1.0, 1.0]],
        }
    }

    fn corner_norm_oracle(b: &ParameterBox) -> f64 {
        let k = b.dim();
        (0..(1usize << k))
            .map(|mask| {
                (0..k)
                    .map(|i| {
                        let v = if mask >> i & 1 == 1 {
                            b.upper()[i]
                        } else {
                            b.lower()[i]
                        };
                        v * v
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn box_validation() {
        assert!(ParameterBox::new(vec![0.0, -1.0], vec![1.0, 1.0], 1).is_err());
        assert!(ParameterBox::new(vec![1.0, 1.0], vec![0.0, 2.0], 1).is_err());
        assert!(ParameterBox::new(vec![0.0], vec![1.0, 2.0], 0).is_err());
        let b = ParameterBox::new(vec![0.0, -3.0], vec![1.0, -1.0], 1).unwrap();
        assert_eq!(b.sign(), Sign::Negative);
        assert_eq!(b.beta0_floor(), 1.0);
    }

    #[test]
    fn projection_examples() {
        let b = ParameterBox::new(vec![-1.0, 1.0], vec![1.0, 2.0], 1).unwrap();
        let inside = DVector::from_vec(vec![0.3, 1.5]);
        assert_eq!(b.project(&inside).unwrap(), inside);
        let above = DVector::from_vec(vec![0.3, 2.5]);
        assert_eq!(
            b.project(&above).unwrap(),
            DVector::from_vec(vec![0.3, 2.0])
        );
        let sq = ParameterBox::new(vec![-1.0, 0.5], vec![1.0, 1.0], 1).unwrap();
        let c = ParameterBox::new(vec![-1.0, -1.0], vec![1.0, 1.0], 0);
        assert!(c.is_err()); // beta_0 interval straddles zero
        assert_eq!(
            sq.project(&DVector::from_vec(vec![2.0, 2.0])).unwrap(),
            DVector::from_vec(vec![1.0, 1.0])
        );
        assert!(b.project(&DVector::zeros(3)).is_err());
    }

    #[test]
    fn norm_examples() {
        let b = ParameterBox::new(vec![-1.0, 0.5], vec![1.0, 1.0], 1).unwrap();
        assert_abs_diff_eq!(b.norm(), (1.0f64 + 1.0).sqrt());
        let b = ParameterBox::new(vec![0.0, -4.0], vec![3.0, -0.5], 1).unwrap();
        assert_abs_diff_eq!(corner_norm_oracle(&b), 5.0);
        assert_abs_diff_eq!(b.norm(), 5.0);
        let s = sec5_coefficients().to_parameter_box_d1().unwrap();
        assert_eq!(s.lower(), &[-2.0, -2.0, 1.5, -1.0]);
        assert_eq!(s.upper(), &[2.0, 2.0, 5.0, 1.0]);
        assert_abs_diff_eq!(corner_norm_oracle(&s), 34f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.norm(), 34f64.sqrt());
    }

    #[test]
    fn assumption1_examples() {
        let corners = sec5_coefficients().corners().unwrap();
        assert_eq!(corners.len(), 16);
        let r = check_assumption1(&corners);
        assert!(r.ok);
        assert_abs_diff_eq!(r.lambda_under, 1.0 / 1.5, epsilon = 1e-12);

        let bad = PlantParameters::new(1, vec![], vec![1.0, 2.0]).unwrap();
        let mut s = corners.clone();
        s.push(bad);
        let r = check_assumption1(&s);
        assert!(!r.ok);
        assert_eq!(r.violations.len(), 1);

        let flat = PlantParameters::new(1, vec![0.2], vec![3.0]).unwrap();
        let r = check_assumption1(&[flat]);
        assert!(r.ok);
        assert_eq!(r.lambda_under, 0.0);

        let a = PlantParameters::new(1, vec![], vec![1.0]).unwrap();
        let b = PlantParameters::new(1, vec![], vec![-1.0]).unwrap();
        assert!(!check_assumption1(&[a, b]).ok);
    }

    #[test]
    fn coefficient_box_rejects_straddling_b0() {
        let c = CoefficientBox {
            d: 1,
            a: vec![],
            b: vec![[-1.0, 1.0]],
        };
        assert!(c.validate().is_err());
        assert!(c.to_parameter_box_d1().is_err());
    }

    fn arb_box() -> impl Strategy<Value = ParameterBox> {
        proptest::collection::vec((-3.0f64..3.0, 0.0f64..2.0), 1..7).prop_map(|iv| {
            let mut lower: Vec<f64> = iv.iter().map(|(l, _)| *l).collect();
            let mut upper: Vec<f64> = iv.iter().map(|(l, w)| l + w).collect();
            lower[0] = 0.5;
            upper[0] = upper[0].max(0.5) + 0.5;
            ParameterBox::new(lower, upper, 0).unwrap()
        })
    }

    proptest! {
        #[test]
        fn projection_is_idempotent_and_nonexpansive(
            b in arb_box(),
            xs in proptest::collection::vec(-6.0f64..6.0, 7),
            ys in proptest::collection::vec(-6.0f64..6.0, 7),
        ) {
            let k = b.dim();
            let x = DVector::from_iterator(k, xs.into_iter().take(k));
            let y = DVector::from_iterator(k, ys.into_iter().take(k));
            let px = b.project(&x).unwrap();
            let py = b.project(&y).unwrap();
            prop_assert!(b.contains(&px, 0.0));
            prop_assert_eq!(&b.project(&px).unwrap(), &px);
            prop_assert!((&px - &py).norm() <= (&x - &y).norm() + 1e-15);
        }

        #[test]
        fn norm_equals_corner_maximum(b in arb_box()) {
            prop_assert!((b.norm() - corner_norm_oracle(&b)).abs() <= 1e-12);
        }
    }
}
