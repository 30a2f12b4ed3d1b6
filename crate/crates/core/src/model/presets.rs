//! Ready-made test plants with matching predictor-space boxes.

use nalgebra::DVector;
use rand::Rng;

use crate::error::Result;
use crate::model::param_box::{CoefficientBox, ParameterBox};
use crate::model::plant::{to_predictor, PlantParameters};
use crate::poly::Polynomial;

/// Coefficient box of the four-parameter example plant:
/// `a_1, a_2 in [-2, 2]`, `b_0 in [1.5, 5]`, `b_1 in [-1, 1]`, `d = 1`.
pub fn example_coefficient_box() -> CoefficientBox {
    CoefficientBox {
        d: 1,
        a: vec![[-2.0, 2.0], [-2.0, 2.0]],
        b: vec![[1.5, 5.0], [-1.0, 1.0]],
    }
}

/// The example box mapped to predictor coordinates.
pub fn example_parameter_box() -> ParameterBox {
    example_coefficient_box()
        .to_parameter_box_d1()
        .expect("example box is valid")
}

/// A minimum-phase plant for delay `d` and a box around its predictor
/// parameters. Boxes for `d > 1` are given directly in predictor space.
pub fn test_plant(d: usize) -> Result<(PlantParameters, ParameterBox)> {
    let plant = match d {
        1 => PlantParameters::new(1, vec![-1.2, 0.5], vec![1.0, 0.4])?,
        2 => PlantParameters::new(2, vec![-0.8, 0.3], vec![1.5, -0.6])?,
        _ => PlantParameters::new(d, vec![0.5, -0.4, 0.1], vec![2.0, 0.5, 0.1])?,
    };
    let theta: DVector<f64> = to_predictor(&plant)?.to_vector();
    let b = ParameterBox::around(&theta, plant.n(), 0.5, 0.5)?;
    Ok((plant, b))
}

/// Random plant with orders `(n, m, d)`: stable `A` (`sum |a_i| < 0.9`) and
/// minimum-phase `B` built from real zeros of magnitude below 0.8, with
/// `b_0` in `[1, 3]` of random sign.
pub fn random_plant<R: Rng + ?Sized>(
    n: usize,
    m: usize,
    d: usize,
    rng: &mut R,
) -> Result<PlantParameters> {
    let a: Vec<f64> = (0..n)
        .map(|_| rng.random_range(-0.9..0.9) / n as f64)
        .collect();
    let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let mut b = Polynomial::constant(sign * rng.random_range(1.0..3.0));
    for _ in 0..m {
        b = b.mul(&Polynomial::new(vec![1.0, -rng.random_range(-0.8..0.8)])?);
    }
    PlantParameters::new(d, a, b.into_coeffs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::param_box::check_assumption1;

    #[test]
    fn presets_are_admissible() {
        for d in 1..=3 {
            let (p, b) = test_plant(d).unwrap();
            assert!(check_assumption1(&[p.clone()]).ok);
            let theta = to_predictor(&p).unwrap().to_vector();
            assert!(b.contains(&theta, 0.0));
            assert_eq!(b.dim(), p.dim());
        }
    }

    #[test]
    fn random_plants_are_admissible() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for k in 0..40 {
            let p = random_plant(k % 5, k % 4, 1 + k % 3, &mut rng).unwrap();
            assert!(check_assumption1(&[p.clone()]).ok);
            assert!(p.a().iter().map(|a| a.abs()).sum::<f64>() < 0.9);
        }
    }
}
