use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use seabed_core::{diagnostics, io};
use seabed_core::prior::standard_normal_vec;
use seabed_core::samplers::{ChainSample, SampleSet};

const TINY: &str = "mesh = { nx = 24, ny = 12 }\nsensors = { count = 22, nx = 24 }\n\
[solver]\ndt = 0.02\nt_max = 0.6\nfrequencies = [1.5]\n[solver.sources]\nwidth = 0.04\n\
[kl]\nn_kl = 6\n[data]\nnx = 48\nny = 24\nsubsteps = 2\n";

fn write_config(dir: &Path) -> String {
    let p = dir.join("tiny.toml");
    std::fs::write(&p, TINY).unwrap();
    p.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> i32 {
    seabed_cli::run(std::iter::once("seabed").chain(args.iter().copied()))
}

#[test]
fn usage_errors_exit_with_2() {
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&["sample-fixed-s"]), 2);
    assert_eq!(run(&["forward", "--set", "solver.dt"]), 2);
}

#[test]
fn config_errors_exit_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    assert_eq!(run(&["forward", "--set", "solver.dt=-1", "--out", out.to_str().unwrap()]), 3);
    assert_eq!(run(&["forward", "--config", "/nonexistent.toml"]), 3);
}

#[test]
fn numerical_errors_exit_with_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("o");
    // A time step far beyond the stability limit blows up.
    let code = run(&["forward", "--config", &cfg, "--set", "solver.dt=0.5", "--set", "solver.t_max=40.0", "--flat", "-0.5", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 4);
}

#[test]
fn forward_emits_one_snapshot_per_observation_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fwd");
    let code = run(&[
        "forward", "--set", "mesh = { nx = 94, ny = 48 }", "--set", "sensors = { count = 46, nx = 47 }",
        "--set", "solver.dt=0.0076", "--set", "solver.t_max=0.38", "--set", "solver.frequencies=[1.0]",
        "--flat", "-0.5", "--svg", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    let m = io::read_measurement(&out.join("measurement.csv")).unwrap();
    assert_eq!(m.n_time(), 50);
    assert_eq!(m.n_sensor(), 46);
    assert!(out.join("trace_center.svg").exists());
    assert!(out.join("manifest.json").exists());
}

#[test]
fn inverse_crime_needs_explicit_permission() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dir.path().join("gen");
    let out = out.to_str().unwrap();
    assert_eq!(run(&["generate-data", "--config", &cfg, "--set", "data.nx=24", "--set", "data.ny=12", "--out", out]), 3);
    assert_eq!(
        run(&["generate-data", "--config", &cfg, "--set", "data.nx=24", "--set", "data.ny=12", "--set", "data.substeps=1", "--allow-inverse-crime", "--out", out]),
        0
    );
}

#[test]
fn zero_samples_give_a_valid_empty_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let gen = dir.path().join("gen");
    assert_eq!(run(&["generate-data", "--config", &cfg, "--out", gen.to_str().unwrap()]), 0);
    let data = gen.join("data.csv");
    let m = io::read_measurement(&data).unwrap();
    assert!(m.sigma.is_some());
    let out = dir.path().join("pcn");
    let code = run(&["sample-fixed-s", "--config", &cfg, "--data", data.to_str().unwrap(), "--samples", "0", "--warmup", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let set = io::read_samples(&out.join("samples.csv")).unwrap();
    assert!(set.is_empty());
    assert_eq!(set.n_kl, 6);
    assert_eq!(io::read_samples(&out.join("warmup.csv")).unwrap().len(), 3);
}

#[test]
fn diagnose_reports_the_ess_of_each_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let n = 4000;
    let n_kl = 6;
    let samples = (0..n)
        .map(|i| ChainSample {
            iteration: i,
            walker: 0,
            s: 0.75,
            phi: 0.0,
            accepted_h_rate: 1.0,
            accepted_s_rate: 0.0,
            coeffs: standard_normal_vec(&mut rng, n_kl),
        })
        .collect::<Vec<ChainSample>>();
    let columns: Vec<Vec<f64>> = (0..n_kl).map(|j| samples.iter().map(|c| c.coeffs[j]).collect()).collect();
    let set = SampleSet { n_kl, samples, beta_h: 1.0, beta_s: 0.0 };
    let file = dir.path().join("iid.csv");
    io::write_samples(&file, &set).unwrap();
    let out = dir.path().join("diag");
    let code = run(&["diagnose", "--set", "kl.n_kl=6", "--samples", file.to_str().unwrap(), "--svg", "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("summary.json")).unwrap()).unwrap();
    let reported = summary["coefficients"].as_array().unwrap();
    assert_eq!(reported.len(), n_kl);
    for (c, col) in reported.iter().zip(&columns) {
        let ess = c["ess"].as_f64().unwrap();
        assert_eq!(ess, diagnostics::ess(col).unwrap());
        // Independent draws: the estimate scatters around n by ~10%.
        assert!((ess / n as f64 - 1.0).abs() < 0.3, "{ess}");
    }
    assert!(out.join("band.csv").exists());
    assert!(out.join("band.svg").exists());
    assert!(summary["s"].is_null());
}

#[test]
fn thread_count_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("oop");
    assert_eq!(run(&["make-oop-seabed", "--set", "threads=2", "--count", "3", "--out", out.to_str().unwrap()]), 0);
    let m: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("manifest.json")).unwrap()).unwrap();
    if std::env::var("SEABED_THREADS").is_err() {
        assert_eq!(m["threads"], 2);
    }
    assert_eq!(m["outputs"].as_array().unwrap().len(), 6);
    let c = io::read_curve(&out.join("seabed_002.csv")).unwrap();
    assert!(c.values.iter().all(|v| v.abs() <= 0.25));
}

#[test]
fn replay_detects_modified_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let gen = dir.path().join("gen");
    assert_eq!(run(&["generate-data", "--config", &cfg, "--out", gen.to_str().unwrap()]), 0);
    let data = gen.join("data.csv");
    let out = dir.path().join("pcn");
    assert_eq!(run(&["sample-fixed-s", "--config", &cfg, "--data", data.to_str().unwrap(), "--samples", "4", "--warmup", "2", "--out", out.to_str().unwrap()]), 0);
    let manifest = out.join("manifest.json");
    assert_eq!(run(&["replay", manifest.to_str().unwrap()]), 0);
    let mut text = std::fs::read_to_string(&data).unwrap();
    text.push_str("\n");
    std::fs::write(&data, text).unwrap();
    assert_eq!(run(&["replay", manifest.to_str().unwrap()]), 6);
}
