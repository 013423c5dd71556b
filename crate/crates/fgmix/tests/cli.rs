//! End-to-end smoke tests for the command-line driver.

use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_fgmix"))
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn generate_fit_sample_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let csv = dir.path().join("points.csv");
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        format!(
            "generator.name = olympic_rings\n\
             generator.noise_sd = 0.01\n\
             data.path = {}\n\
             mcmc.n_iter = 30\n\
             mcmc.burn_in = 10\n\
             mcmc.thin = 2\n\
             sample.n = 77\n\
             predictive.n_prior_draws = 5\n",
            csv.display()
        ),
    )
    .unwrap();
    let cfg = cfg_path.to_str().unwrap();

    let gen = run(&["generate", "--config", cfg, "--seed", "1", "--out", out]);
    assert!(gen.status.success());
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("x1,x2,label\n"));
    assert_eq!(text.lines().count(), 1501);

    let fit = run(&["fit", "--config", cfg, "--seed", "1", "--out", out]);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    assert!(dir.path().join("trace.jsonl").exists());
    let diag = std::fs::read_to_string(dir.path().join("diagnostics.json")).unwrap();
    let diag: serde_json::Value = serde_json::from_str(&diag).unwrap();
    let sweeps = diag[0].as_array().unwrap();
    assert_eq!(sweeps.len(), 30);
    for s in sweeps {
        assert!(s["loglik"].as_f64().unwrap().is_finite());
        for a in s["tau_accept"].as_array().unwrap() {
            let a = a.as_f64().unwrap();
            assert!((0.0..=1.0).contains(&a));
        }
    }

    let sample = run(&["sample", "--config", cfg, "--seed", "9", "--out", out]);
    assert!(sample.status.success());
    let samples = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert!(samples.starts_with("x1,x2\n"));
    assert_eq!(samples.lines().count(), 78);
    // deterministic per seed
    let bytes = std::fs::read(dir.path().join("samples.csv")).unwrap();
    assert!(run(&["sample", "--config", cfg, "--seed", "9", "--out", out])
        .status
        .success());
    assert_eq!(bytes, std::fs::read(dir.path().join("samples.csv")).unwrap());
}

#[test]
fn classify_reports_accuracy() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    // two well-separated classes: unit circles far apart
    let mut rows_train = String::from("x1,x2,label\n");
    let mut rows_test = String::from("x1,x2,label\n");
    for i in 0..40 {
        let th = i as f64 * 0.157;
        rows_train.push_str(&format!("{},{},0\n", th.cos(), th.sin()));
        rows_train.push_str(&format!("{},{},1\n", 8.0 + th.cos(), th.sin()));
        rows_test.push_str(&format!("{},{},0\n", (th + 0.05).cos(), (th + 0.05).sin()));
        rows_test.push_str(&format!("{},{},1\n", 8.0 + (th + 0.05).cos(), (th + 0.05).sin()));
    }
    let train = dir.path().join("train.csv");
    let test = dir.path().join("test.csv");
    std::fs::write(&train, rows_train).unwrap();
    std::fs::write(&test, rows_test).unwrap();
    let cfg_path = dir.path().join("run.cfg");
    std::fs::write(
        &cfg_path,
        format!(
            "data.path = {}\n\
             data.test_path = {}\n\
             mcmc.n_iter = 60\n\
             mcmc.burn_in = 30\n\
             mcmc.thin = 3\n\
             predictive.n_prior_draws = 5\n",
            train.display(),
            test.display()
        ),
    )
    .unwrap();
    let res = run(&[
        "classify",
        "--config",
        cfg_path.to_str().unwrap(),
        "--seed",
        "3",
        "--out",
        out,
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let metrics = std::fs::read_to_string(dir.path().join("metrics.json")).unwrap();
    let metrics: serde_json::Value = serde_json::from_str(&metrics).unwrap();
    assert_eq!(metrics["accuracy"].as_f64().unwrap(), 1.0);
    assert_eq!(metrics["seed"], 3);
    assert!(Path::new(out).join("trace.class0.jsonl").exists());
    assert!(Path::new(out).join("trace.class1.jsonl").exists());
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg_path = dir.path().join("bad.cfg");
    std::fs::write(&cfg_path, "nonsense.key = 1\n").unwrap();
    let res = run(&[
        "generate",
        "--config",
        cfg_path.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("nonsense.key"));

    // malformed CSV row: error names the line
    let csv = dir.path().join("bad.csv");
    std::fs::write(&csv, "x1,x2\n1.0,2.0\noops,3.0\n").unwrap();
    let cfg2 = dir.path().join("fit.cfg");
    std::fs::write(&cfg2, format!("data.path = {}\n", csv.display())).unwrap();
    let res = run(&[
        "fit",
        "--config",
        cfg2.to_str().unwrap(),
        "--out",
        out,
    ]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 3"));
}
