use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn sparseva(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparseva")).args(args).output().unwrap()
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn scalar_regression_shrinks_to_the_constraint() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "y,phi_1\n1.5,1\n-0.5,-1\n");
    let out = sparseva(&["estimate", "--data", &data, "--eps-rule", "explicit:0.25"]);
    let v = stdout_json(&out);
    // theta_NR = 1, residuals ±0.5 so L_NR = 0.125. L(t) = ((1.5-t)² + (t-0.5)²)/4 and
    // L(t) = 0.125·1.25 at t = 1 - √0.0625 = 0.75.
    assert_eq!(v["theta_nr"][0].as_f64().unwrap(), 1.0);
    let t = v["theta_hat"][0].as_f64().unwrap();
    assert!((t - 0.75).abs() < 1e-7, "{t}");
}

#[test]
fn noiseless_data_returns_least_squares() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "y,phi_1,phi_2\n3,1,1\n1,1,-1\n5,2,1\n");
    let v = stdout_json(&sparseva(&["estimate", "--data", &data, "--eps-rule", "explicit:1e-12"]));
    let theta: Vec<f64> = v["theta_hat"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    assert!((theta[0] - 2.0).abs() < 1e-9 && (theta[1] - 1.0).abs() < 1e-9, "{theta:?}");
}

#[test]
fn csv_output_lists_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "y,phi_1\n1.5,1\n-0.5,-1\n");
    let out = sparseva(&["estimate", "--data", &data, "--format", "csv"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("index,theta_hat,theta_nr\n1,"), "{text}");
}

#[test]
fn input_errors_exit_with_2() {
    let out = sparseva(&["estimate", "--data", "/nonexistent/data.csv"]);
    assert_eq!(out.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = write(dir.path(), "bad.csv", "y,phi_1\n1,zz\n");
    let out = sparseva(&["estimate", "--data", &bad]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));

    let out = sparseva(&[
        "bound", "--n", "35", "--n-eta", "36", "-N", "450", "--sigma-e2", "1", "--kappa-alpha", "0.3",
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = sparseva(&["estimate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rank_deficient_data_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", "y,phi_1,phi_2\n1,1,2\n2,2,4\n3,3,6\n");
    assert_eq!(sparseva(&["estimate", "--data", &data]).status.code(), Some(3));
}

#[test]
fn bound_reports_both_terms() {
    let v = stdout_json(&sparseva(&[
        "bound", "--n", "35", "--n-eta", "10", "-N", "1000", "--sigma-e2", "0.01", "--kappa-alpha", "0.3",
        "--tail-l1", "0.05",
    ]));
    let (a1, a2, b) = (v["a1"].as_f64().unwrap(), v["a2"].as_f64().unwrap(), v["bound_sq"].as_f64().unwrap());
    assert_eq!(b, a1.max(a2));
    assert!((v["eps"].as_f64().unwrap() - 0.035).abs() < 1e-15);
    assert!((v["prob"].as_f64().unwrap() - 0.98 * (1.0 - 4.0 * 35.0 * 0.001)).abs() < 1e-12);
}

#[test]
fn curvature_uses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("kappa.csv");
    let args = [
        "curvature", "--sigma", "ar1", "--n", "5", "-N", "40", "--trials", "1000", "--seed", "4", "--cache",
        cache.to_str().unwrap(),
    ];
    let first = stdout_json(&sparseva(&args));
    assert!(cache.exists());
    let second = stdout_json(&sparseva(&args));
    assert_eq!(first, second);
    let w = first["w_min"].as_f64().unwrap();
    assert_eq!(first["kappa_alpha"].as_f64().unwrap(), w / 2.0);

    let sigma = write(dir.path(), "sigma.csv", "1,0\n0,1\n");
    let v = stdout_json(&sparseva(&["curvature", "--sigma", &sigma, "-N", "30", "--trials", "1000"]));
    assert_eq!(v["n"].as_u64(), Some(2));
}

#[test]
fn experiment_dry_run_lists_cells() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "c.toml", "input_kinds = [\"white\"]\nsnr_db = [30, 10]\nrealizations = 3\n");
    let out = sparseva(&["experiment", "--config", &config, "--dry-run", "--eps-rules", "pec,bic"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("12 cells, 36 solves, 108 records"), "{text}");
    assert!(!dir.path().join("results").exists());

    let bad = write(dir.path(), "bad.toml", "n_eta = [50]\n");
    assert_eq!(sparseva(&["experiment", "--config", &bad, "--dry-run"]).status.code(), Some(2));
}

#[test]
fn experiment_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(
        dir.path(),
        "c.toml",
        "input_kinds = [\"white\"]\nsnr_db = [20]\nn_samples = [60, 120]\nn = 8\nn_eta = [3]\nrealizations = 2\ncurvature_trials = 1000\n",
    );
    let out_dir = dir.path().join("out");
    let run = |jobs: &str| {
        let out = sparseva(&["experiment", "--config", &config, "--out", out_dir.to_str().unwrap(), "--jobs", jobs]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(out_dir.join("records.csv")).unwrap()
    };
    let one = run("1");
    let many = run("3");
    assert_eq!(one, many);
    let text = String::from_utf8(one).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    assert!(out_dir.join("summary.csv").exists());
    assert!(fs::read_dir(out_dir.join("figures")).unwrap().count() >= 1);
}

#[test]
fn synth_then_estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("sig.csv");
    let truth = dir.path().join("truth.csv");
    let out = sparseva(&[
        "synth", "--input", "ar1", "--n", "6", "-N", "400", "--snr-db", "inf", "--seed", "5", "--out",
        data.to_str().unwrap(), "--truth", truth.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let hint = String::from_utf8(out.stderr).unwrap();
    assert!(hint.contains("--start 56 --stride 6"), "{hint}");

    let est = stdout_json(&sparseva(&[
        "estimate", "--data", data.to_str().unwrap(), "--fir-order", "6", "--start", "56", "--stride", "6",
        "--eps-rule", "explicit:1e-12",
    ]));
    let theta: Vec<f64> = fs::read_to_string(&truth)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    for (i, t) in theta.iter().enumerate() {
        let e = est["theta_hat"][i].as_f64().unwrap();
        assert!((e - t).abs() < 1e-9, "coefficient {i}: {e} vs {t}");
    }
}
