//! Polynomials in the delay operator `z^{-1}`.
//!
//! Coefficient `i` multiplies `z^{-i}`, so `[1.0, 0.5]` is `1 + 0.5 z^{-1}`.
//! Trailing zeros are kept unless [`Polynomial::normalized`] is called: the
//! predictor coefficients must keep their full length even when the tail
//! vanishes.

use nalgebra::{linalg::Schur, DMatrix};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::EmptyPolynomial);
        }
        Ok(Self { coeffs })
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    pub fn one() -> Self {
        Self::constant(1.0)
    }

    /// `z^{-k}`.
    pub fn delay(k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `z^{-i}`; zero past the stored length.
    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    /// Strips trailing zeros, keeping at least the constant term.
    pub fn normalized(&self) -> Self {
        let keep = self
            .coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .map_or(1, |p| p + 1);
        Self {
            coeffs: self.coeffs[..keep].to_vec(),
        }
    }

    /// Truncates or zero-pads to exactly `len` coefficients (`len >= 1`).
    pub fn resized(&self, len: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(len.max(1), 0.0);
        Self { coeffs }
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &p) in self.coeffs.iter().enumerate() {
            for (j, &q) in other.coeffs.iter().enumerate() {
                out[i + j] += p * q;
            }
        }
        Polynomial { coeffs: out }
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        Polynomial {
            coeffs: (0..len).map(|i| self.coeff(i) + other.coeff(i)).collect(),
        }
    }

    pub fn eval_complex(&self, z_inv: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z_inv + c)
    }
}

impl std::ops::Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        Polynomial::mul(self, rhs)
    }
}

/// Divides `A` into one, `d` terms deep: returns `(F, G)` with
/// `F A + z^{-d} G = 1`, `F` of length `d` and `G` of length `max(n, 1)`.
pub fn long_division(a: &Polynomial, d: usize) -> Result<(Polynomial, Polynomial)> {
    if a.coeffs[0] != 1.0 {
        return Err(Error::NotMonic(a.coeffs[0]));
    }
    if d < 1 {
        return Err(Error::ZeroDelay);
    }
    let n = a.degree();

    // Power-series coefficients of 1/A, first d of them.
    let mut f = vec![0.0; d];
    f[0] = 1.0;
    for k in 1..d {
        let s: f64 = (1..=n.min(k)).map(|i| a.coeffs[i] * f[k - i]).sum();
        f[k] = -s;
    }
    let f = Polynomial { coeffs: f };

    // Remainder: 1 - F A lives at powers d..d+n-1.
    let fa = f.mul(a);
    let g: Vec<f64> = (0..n.max(1)).map(|i| -fa.coeff(d + i)).collect();
    Ok((f, Polynomial { coeffs: g }))
}

/// The values `lambda` with `B(lambda^{-1}) = 0`, i.e. the roots of
/// `b_0 z^m + b_1 z^{m-1} + ... + b_m`, from the companion matrix.
pub fn zeros_in_z(b: &Polynomial) -> Result<Vec<Complex64>> {
    let b0 = b.coeffs[0];
    if b0 == 0.0 {
        return Err(Error::ZeroLeadingCoefficient);
    }
    let m = b.degree();
    if m == 0 {
        return Ok(Vec::new());
    }
    let mut companion = DMatrix::<f64>::zeros(m, m);
    for j in 0..m {
        companion[(0, j)] = -b.coeffs[j + 1] / b0;
    }
    for i in 1..m {
        companion[(i, i - 1)] = 1.0;
    }
    eigenvalues(&companion)
}

/// Eigenvalues via a real Schur form with an iteration cap.
///
/// The unbounded QR iteration can stall on matrices with a defective
/// eigenvalue, so a stalled attempt is retried on a shifted copy
/// `M + sI` (whose spectrum is that of `M` moved by `s`).
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let k = m.nrows();
    if k == 0 {
        return Ok(Vec::new());
    }
    let scale = m.amax().max(1.0);
    for shift in [0.0, 0.37, -0.61, 1.13] {
        let shifted = m + DMatrix::identity(k, k) * (shift * scale);
        if let Some(schur) = Schur::try_new(shifted, f64::EPSILON, 200 * k + 1000) {
            return Ok(schur
                .complex_eigenvalues()
                .iter()
                .map(|z| z - shift * scale)
                .collect());
        }
    }
    Err(Error::Invalid(format!(
        "eigenvalue iteration did not converge for a {k}x{k} matrix"
    )))
}

/// Largest zero magnitude of `B`, zero when `B` is a constant.
pub fn max_zero_magnitude(b: &Polynomial) -> Result<f64> {
    Ok(zeros_in_z(b)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}
