use std::path::{Path, PathBuf};
use std::process::Command;

use dstep_cli::config::{EstimatorSpec, Theta0Spec, X0Spec};
use dstep_cli::experiments::{self, time_varying_example_config, SweepConfig};
use dstep_cli::tracefile;
use dstep_cli::ExperimentConfig;
use dstep_core::analysis::CheckStatus;
use dstep_core::controller::SignalSpec;
use dstep_core::estimator::Deadzone;
use dstep_core::model::{presets, TimeVaryingPlant};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dstep"))
}

fn shipped_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/time_varying_example.cfg")
}

fn quiet_config(d: usize, horizon: i64) -> ExperimentConfig {
    let (plant, pbox) = presets::test_plant(d).unwrap();
    ExperimentConfig {
        plant: TimeVaryingPlant::constant(plant),
        coefficient_box: None,
        parameter_box: pbox,
        estimator: EstimatorSpec {
            delta: Deadzone::Finite(0.5),
            theta0: Theta0Spec::Random,
            min_phi_norm: 0.0,
        },
        reference: SignalSpec::Cosine {
            amplitude: 1.0,
            frequency: 0.7,
            phase: 0.1,
        },
        disturbance: SignalSpec::Zero,
        x0: X0Spec::ConsistentRandom,
        t0: 0,
        horizon,
        seed: 5,
    }
}

#[test]
fn shipped_example_config_matches_the_builtin() {
    let shipped = ExperimentConfig::load(shipped_config()).unwrap();
    assert_eq!(shipped, time_varying_example_config());
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.json");
    for cfg in [time_varying_example_config(), quiet_config(2, 50)] {
        cfg.save(&path).unwrap();
        assert_eq!(ExperimentConfig::load(&path).unwrap(), cfg);
    }
}

#[test]
fn zero_config_gives_an_all_zero_trace() {
    let mut cfg = quiet_config(1, 30);
    cfg.reference = SignalSpec::Zero;
    cfg.x0 = X0Spec::Zero;
    let (_, trace) = experiments::simulate(&cfg).unwrap();
    for r in trace.records() {
        assert_eq!((r.y, r.u, r.e, r.eps, r.nu), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(r.rho, 0);
    }
}

#[test]
fn simulate_is_bit_reproducible_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    quiet_config(2, 200).save(&cfg_path).unwrap();
    let mut files = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let st = bin()
            .args(["simulate", "--config"])
            .arg(&cfg_path)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(st.success());
        files.push(std::fs::read(out.join("trace.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);

    let out = bin()
        .args(["verify", "--config"])
        .arg(&cfg_path)
        .arg("--trace")
        .arg(dir.path().join("run0/trace.csv"))
        .arg("--out")
        .arg(dir.path().join("v"))
        .output()
        .unwrap();
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{text}");
    assert!(!text.contains("FAIL"), "{text}");
    assert!(
        text.contains("PASS  decomposition_reconstruction"),
        "{text}"
    );
}

#[test]
fn trace_csv_round_trip_is_exact() {
    let cfg = quiet_config(3, 120);
    let (resolved, trace) = experiments::simulate(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    tracefile::save_trace(&trace, &path).unwrap();
    let back = tracefile::load_trace(
        &path,
        (trace.n(), trace.m(), trace.d()),
        resolved.sim.x0.clone(),
        resolved.sim.estimator.theta0().clone(),
    )
    .unwrap();
    assert_eq!(back, trace);
}

#[test]
fn corrupted_estimate_column_fails_the_step_bound() {
    let cfg = quiet_config(1, 100);
    let (resolved, mut trace) = experiments::simulate(&cfg).unwrap();
    trace.records_mut()[40].theta_hat[0] += 0.3;
    let rep = experiments::verify(&resolved, &trace).unwrap();
    assert_eq!(rep.get("step_bound").unwrap().status, CheckStatus::Fail);
    assert!(!rep.passed());

    // Same through the binary: exit code 1.
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("cfg.json");
    cfg.save(&cfg_path).unwrap();
    let csv = dir.path().join("t.csv");
    tracefile::save_trace(&trace, &csv).unwrap();
    let st = bin()
        .args(["verify", "--config"])
        .arg(&cfg_path)
        .arg("--trace")
        .arg(&csv)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(1));
}

#[test]
fn truncated_trace_skips_the_decomposition() {
    let cfg = quiet_config(3, 100);
    let (resolved, trace) = experiments::simulate(&cfg).unwrap();
    // Through t0 + 2d - 1: one step short of the first decomposition.
    let short = trace.truncated(trace.t0() + 2 * 3 - 1);
    let rep = experiments::verify(&resolved, &short).unwrap();
    for name in [
        "decomposition_reconstruction",
        "delta_bar_norm",
        "extended_system",
    ] {
        let c = rep.get(name).unwrap();
        assert_eq!(c.status, CheckStatus::Skip, "{c:?}");
        assert!(c.note.contains("too short"), "{c:?}");
    }
    assert!(rep.passed());
}

#[test]
fn config_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut v: serde_json::Value =
        serde_json::from_str(&quiet_config(1, 20).to_json().unwrap()).unwrap();
    v["x0"] = serde_json::json!({"kind": "explicit", "y_hist": [1.0], "u_hist": []});
    std::fs::write(&bad, v.to_string()).unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("x0 needs"));

    let out = bin().args(["simulate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));

    // A b_0 interval straddling zero is rejected when the box is read.
    let mut v: serde_json::Value =
        serde_json::from_str(&quiet_config(1, 20).to_json().unwrap()).unwrap();
    let beta0 = v["parameter_box"]["beta0_index"].as_u64().unwrap() as usize;
    v["parameter_box"]["lower"][beta0] = serde_json::json!(-1.0);
    std::fs::write(&bad, v.to_string()).unwrap();
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&bad)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_does_not_depend_on_worker_count() {
    let cfg = SweepConfig {
        n_plants: 6,
        runs_per_plant: 2,
        horizon: 120,
        ..SweepConfig::example()
    };
    let one = experiments::run_sweep(&cfg, Some(1)).unwrap();
    let four = experiments::run_sweep(&cfg, Some(4)).unwrap();
    assert_eq!(one, four);
    assert_eq!(
        serde_json::to_string(&one).unwrap(),
        serde_json::to_string(&four).unwrap()
    );
}

#[test]
fn single_plant_sweep_matches_simulate_and_verify() {
    let cfg = SweepConfig {
        n_plants: 1,
        runs_per_plant: 1,
        horizon: 150,
        ..SweepConfig::example()
    };
    let rep = experiments::run_sweep(&cfg, Some(1)).unwrap();
    let plant = cfg.sample_plant(0).unwrap();
    let run_cfg = cfg
        .run_config(&plant, 0, 0, dstep_cli::seeding::Stream::Run)
        .unwrap();
    let (resolved, trace) = experiments::simulate(&run_cfg).unwrap();
    let v = experiments::verify(&resolved, &trace).unwrap();
    assert_eq!(rep.plants[0].verify_failures.is_empty(), v.passed());
    let floor = resolved.sim.estimator.param_box.beta0_floor();
    let mut norms = [0.0f64; 3];
    for t in (trace.t0() - 1)..=(trace.t_end() - 2) {
        let n = dstep_core::analysis::crude::crude_model_at(&trace, &resolved.sim.plant, floor, t)
            .unwrap()
            .norms();
        for k in 0..3 {
            norms[k] = norms[k].max(n[k]);
        }
    }
    assert_eq!(rep.plants[0].max_norms, norms);
}

#[test]
fn repro_example_runs_from_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("repro-example")
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["degrades_under_disturbance"], true);
    assert_eq!(summary["recovers_after_disturbance"], true);
    // The emitted trace re-verifies against the shipped config.
    let st = bin()
        .args(["verify", "--config"])
        .arg(shipped_config())
        .arg("--trace")
        .arg(dir.path().join("trace.csv"))
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(st.success());
}
