use dstep_core::analysis::{build_good_model, verify_trace, CheckStatus, VerifyOptions};
use dstep_core::controller::{closed_loop_run, SignalSpec, Simulation};
use dstep_core::estimator::{lyapunov, Deadzone, EstimatorConfig};
use dstep_core::model::{
    predictor_gap, presets, to_predictor, InitialCondition, ParameterBox, TimeVaryingPlant,
};
use dstep_core::poly::zeros_in_z;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_sim(seed: u64, d: usize, delta: Deadzone, noise: f64, horizon: i64) -> Simulation {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, m) = (rng.random_range(0..=3), rng.random_range(0..=2));
    let plant = presets::random_plant(n, m, d, &mut rng).unwrap();
    let theta = to_predictor(&plant).unwrap().to_vector();
    let pbox = ParameterBox::around(&theta, n, 0.4, 0.3).unwrap();
    let theta0 = pbox.sample(&mut rng);
    Simulation {
        plant: TimeVaryingPlant::constant(plant.clone()),
        estimator: EstimatorConfig::new(pbox, theta0)
            .unwrap()
            .with_delta(delta),
        reference: SignalSpec::Cosine {
            amplitude: 1.0,
            frequency: rng.random_range(0.2..2.0),
            phase: 0.0,
        },
        disturbance: SignalSpec::Cosine {
            amplitude: noise,
            frequency: 2.3,
            phase: 0.4,
        },
        x0: InitialCondition::consistent_random(&plant, &mut rng),
        t0: rng.random_range(-5..5),
        horizon: 0,
    }
    .with_horizon(horizon)
}

trait WithHorizon {
    fn with_horizon(self, h: i64) -> Self;
}

impl WithHorizon for Simulation {
    fn with_horizon(mut self, h: i64) -> Self {
        self.horizon = self.t0 + h;
        self
    }
}

#[test]
fn direct_and_predictor_recursions_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..50 {
        let (n, m, d) = (
            rng.random_range(0..=4),
            rng.random_range(0..=3),
            rng.random_range(1..=3),
        );
        let p = presets::random_plant(n, m, d, &mut rng).unwrap();
        let u: Vec<f64> = (0..500).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..500).map(|_| rng.random_range(-0.1..0.1)).collect();
        assert!(predictor_gap(&p, &u, &w).unwrap() <= 1e-8);
    }
}

#[test]
fn runs_are_deterministic() {
    let sim = random_sim(4, 2, Deadzone::Finite(1.0), 0.05, 200);
    assert_eq!(
        closed_loop_run(&sim).unwrap(),
        closed_loop_run(&sim).unwrap()
    );
}

#[test]
fn wrong_nominal_matrix_is_caught() {
    let sim = random_sim(9, 2, Deadzone::Infinite, 0.0, 150);
    let trace = closed_loop_run(&sim).unwrap();
    let p = sim.plant.at(sim.t0).unwrap();
    let mut good = build_good_model(&p).unwrap();
    let (r, _) = dstep_core::analysis::good_model_residual(&good, &trace, sim.t0 + 20).unwrap();
    assert!(r < 1e-9);
    let last = good.a_g.nrows() - 1;
    good.a_g[(last, 0)] += 0.05;
    let worst = (sim.t0..sim.t0 + 100)
        .map(|t| {
            dstep_core::analysis::good_model_residual(&good, &trace, t)
                .unwrap()
                .0
        })
        .fold(0.0, f64::max);
    assert!(worst > 1e-6);
}

#[test]
fn nominal_spectrum_is_plant_zeros_plus_origin() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let (n, m, d) = (
            rng.random_range(0..=3),
            rng.random_range(0..=3),
            rng.random_range(1..=3),
        );
        let p = presets::random_plant(n, m, d, &mut rng).unwrap();
        let g = build_good_model(&p).unwrap();
        let got = g.characteristic_polynomial();
        // Independent oracle: expand prod (z - z_k) over the computed zeros.
        let mut want = vec![num_complex::Complex64::new(1.0, 0.0)];
        for z in zeros_in_z(&p.b_poly()).unwrap() {
            let mut next = want.clone();
            next.push(0.0.into());
            for k in 1..next.len() {
                next[k] -= z * want[k - 1];
            }
            want = next;
        }
        want.extend(std::iter::repeat(num_complex::Complex64::new(0.0, 0.0)).take(n + d));
        assert_eq!(got.len(), want.len());
        for (a, b) in got.iter().zip(&want) {
            assert!(
                (a - b.re).abs() < 1e-9 && b.im.abs() < 1e-9,
                "{got:?} vs {want:?}"
            );
        }
        // The zeros of B are simple here, so the nonzero eigenvalues match directly.
        let eig = g.eigenvalues().unwrap();
        for z in zeros_in_z(&p.b_poly()).unwrap() {
            let best = eig
                .iter()
                .map(|e| (e - z).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(
                best < 1e-6 || z.norm() < 1e-2,
                "zero {z} missing from {eig:?}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn estimates_stay_in_box_and_steps_are_bounded(seed in 0u64..10_000, d in 1usize..=3, finite in any::<bool>(), noisy in any::<bool>()) {
        let delta = if finite { Deadzone::Finite(0.5) } else { Deadzone::Infinite };
        let sim = random_sim(seed, d, delta, if noisy { 0.1 } else { 0.0 }, 120);
        let trace = closed_loop_run(&sim).unwrap();
        let pbox = &sim.estimator.param_box;
        let mut prev = sim.estimator.theta0().clone();
        for r in trace.records() {
            prop_assert!(pbox.contains(&r.theta_hat, 0.0));
            let phi = trace.phi(r.t - d as i64).unwrap();
            let nrm = phi.norm();
            let step = (&r.theta_hat - &prev).norm();
            if r.rho == 1 {
                prop_assert!(step <= r.e.abs() / nrm * (1.0 + 1e-12) + 1e-15);
            } else {
                prop_assert_eq!(step, 0.0);
            }
            prev = r.theta_hat.clone();
        }
    }

    #[test]
    fn lyapunov_never_increases_without_disturbance(seed in 0u64..10_000, d in 1usize..=3) {
        let sim = random_sim(seed, d, Deadzone::Infinite, 0.0, 120);
        let trace = closed_loop_run(&sim).unwrap();
        let star = to_predictor(&sim.plant.at(0).unwrap()).unwrap().to_vector();
        let mut v = lyapunov(sim.estimator.theta0(), &star);
        for r in trace.records() {
            prop_assert!(r.v <= v * (1.0 + 1e-12) + 1e-15);
            v = r.v;
        }
    }

    #[test]
    fn invariant_suite_passes_on_random_plants(seed in 0u64..10_000, d in 1usize..=3, finite in any::<bool>()) {
        let delta = if finite { Deadzone::Finite(1.0) } else { Deadzone::Infinite };
        let sim = random_sim(seed, d, delta, 0.05, 80);
        let trace = closed_loop_run(&sim).unwrap();
        let rep = verify_trace(&trace, &sim.plant, &sim.estimator, &VerifyOptions::default()).unwrap();
        for c in &rep.checks {
            prop_assert!(c.status != CheckStatus::Fail, "{:?}", c);
        }
    }
}
