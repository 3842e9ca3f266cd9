use std::path::Path;
use std::process::Command;

use qrisk::cli::{run, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE};
use qrisk::dgp::{Dgp, DgpId};
use qrisk::num::RngStream;
use qrisk::{fit, Dataset, ModelSpec, SolverOptions};

fn qrisk(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("qrisk").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

fn write_data(dir: &Path, n: usize, seed: u64) -> String {
    let path = dir.join("data.csv");
    let path = path.to_str().unwrap().to_string();
    let (code, _, err) = qrisk(&[
        "simulate",
        "--dgp",
        "1",
        "--n",
        &n.to_string(),
        "--p",
        "6",
        "--seed",
        &seed.to_string(),
        "--out",
        &path,
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    path
}

#[test]
fn simulate_five_rows() {
    let (code, out, _) = qrisk(&["simulate", "--dgp", "1", "--n", "5", "--p", "4", "--seed", "1"]);
    assert_eq!(code, EXIT_OK);
    let lines = data_lines(&out);
    assert_eq!(lines[0], "y,z1,z2,z3,z4");
    assert_eq!(lines.len(), 6);
    assert!(out.starts_with("# qrisk simulate\n"));
    assert!(out.contains("# seed = 1\n"));
    // Same draws as the library.
    let ds = Dataset::read_csv(out.as_bytes()).unwrap();
    let direct = Dgp::new(DgpId::Dgp1, 4).unwrap().sample(5, &RngStream::new(1, 0)).unwrap();
    assert_eq!(ds, direct);
}

#[test]
fn usage_errors_exit_one() {
    let (code, out, err) = qrisk(&["fit"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(out.is_empty());
    assert!(err.contains("Usage"), "{err}");

    for args in [
        &["simulate", "--dgp", "1", "--n", "5"][..],
        &["simulate", "--dgp", "1", "--n", "5", "--seed", "1", "--bogus", "2"],
        &["simulate", "--dgp", "7", "--n", "5", "--seed", "1"],
        &["frobnicate"],
        &[],
    ] {
        assert_eq!(qrisk(args).0, EXIT_USAGE, "{args:?}");
    }
}

#[test]
fn help_goes_to_stdout() {
    let (code, out, _) = qrisk(&["--help"]);
    assert_eq!(code, EXIT_OK);
    for sub in ["fit", "risk", "cv", "oracle", "simulate", "experiment"] {
        assert!(out.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn fit_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_data(dir.path(), 120, 3);
    let (code, out, err) = qrisk(&["fit", "--data", &path, "--tau", "0.3", "--cols", "1-3,5", "--intercept"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let ds = Dataset::read_csv(std::fs::read(&path).unwrap().as_slice()).unwrap();
    let m = ModelSpec::new(vec![1, 2, 3, 5], true).unwrap();
    let f = fit(&ds, &m, 0.3, &SolverOptions::default()).unwrap();
    let lines = data_lines(&out);
    assert_eq!(lines[0], "name,value");
    for (line, (name, v)) in lines[1..].iter().zip(m.column_names().iter().zip(&f.theta)) {
        assert_eq!(*line, format!("{name},{v:.16e}"));
    }
    assert_eq!(lines[6], format!("objective,{:.16e}", f.objective));
    assert!(lines[7].starts_with("duality_gap,"));
}

#[test]
fn risk_and_cv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_data(dir.path(), 200, 4);
    let (code, out, err) = qrisk(&["risk", "--data", &path, "--tau", "0.5", "--cols", "1,2,3,4", "--intercept"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines = data_lines(&out);
    assert_eq!(lines[0], "tau,model,h,in_sample,b_hat,pr_debiased,d0_min_eig");
    let f: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(f[1], "intercept+z1+z2+z3+z4");
    let v: Vec<f64> = [3, 4, 5].iter().map(|&i| f[i].parse().unwrap()).collect();
    assert_eq!(v[0] + v[1], v[2]);
    assert!(v[1] > 0.0);

    let cv_args = ["cv", "--data", &path, "--tau", "0.5", "--cols", "1-4", "--intercept", "--k", "5", "--seed", "9"];
    let (code, a, _) = qrisk(&cv_args);
    assert_eq!(code, EXIT_OK);
    assert_eq!(a, qrisk(&cv_args).1);
    assert_eq!(data_lines(&a)[0], "tau,model,k,cv_risk,in_sample,cv_optimism");
    // in-sample column agrees with the risk subcommand
    assert_eq!(data_lines(&a)[1].split(',').nth(4), Some(f[3]));
}

#[test]
fn numerical_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_data(dir.path(), 50, 5);
    let (code, out, err) = qrisk(&["risk", "--data", &path, "--tau", "0.5", "--cols", "1", "--bandwidth", "1e-12"]);
    assert_eq!(code, EXIT_NUMERICAL);
    assert!(out.is_empty());
    assert!(err.contains("singular density sandwich"), "{err}");
}

#[test]
fn bad_input_files_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "y,z1\n1,2\n3,oops\n").unwrap();
    let (code, _, err) = qrisk(&["fit", "--data", bad.to_str().unwrap(), "--tau", "0.5"]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("line 3"), "{err}");

    let cfg = dir.path().join("c.txt");
    std::fs::write(&cfg, "dgp = 1\nbandwith = 3\n").unwrap();
    let (code, _, err) = qrisk(&["experiment", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    assert!(err.contains("line 2"), "{err}");

    let (code, _, _) = qrisk(&["fit", "--data", "/nonexistent/x.csv", "--tau", "0.5"]);
    assert_eq!(code, EXIT_USAGE);
}

#[test]
fn oracle_row() {
    let (code, out, err) = qrisk(&[
        "oracle",
        "--dgp",
        "1",
        "--tau",
        "0.5",
        "--cols",
        "1,2,3,4",
        "--intercept",
        "--n",
        "100",
        "--reps",
        "20",
        "--seed",
        "7",
    ]);
    assert_eq!(code, EXIT_OK, "{err}");
    let lines = data_lines(&out);
    assert_eq!(lines[0], "tau,model,n,reps,pr,pr_se,optimism,optimism_se,in_sample");
    assert!(lines[1].starts_with("5.0000000000000000e-1,intercept+z1+z2+z3+z4,100,20,"));
    assert_eq!(qrisk(&["oracle", "--dgp", "1", "--tau", "0.5", "--n", "100"]).0, EXIT_USAGE);
}

#[test]
fn experiment_via_binary_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.txt");
    std::fs::write(
        &cfg,
        "dgp = 1\nn = 60\np = 6\ntaus = 0.5\nreps = 3\ncollection = stratified:2\nestimators = trace, cv\n\
         cv_k = 3\nseed = 2\nout = -\n",
    )
    .unwrap();
    let run_bin = |workers: &str| {
        Command::new(env!("CARGO_BIN_EXE_qrisk"))
            .args(["experiment", "--config", cfg.to_str().unwrap(), "--workers", workers])
            .output()
            .unwrap()
    };
    let a = run_bin("1");
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, run_bin("1").stdout);
    assert_eq!(a.stdout, run_bin("2").stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("# seed = 2\n"));
    assert!(text.contains("# model 1 = intercept\n"));
    assert_eq!(data_lines(&text).len(), 1 + 11);

    // --seed overrides the config
    let b = Command::new(env!("CARGO_BIN_EXE_qrisk"))
        .args(["experiment", "--config", cfg.to_str().unwrap(), "--seed", "3"])
        .output()
        .unwrap();
    assert!(String::from_utf8(b.stdout).unwrap().contains("# seed = 3\n"));
}

#[test]
fn binary_exit_codes() {
    let st = Command::new(env!("CARGO_BIN_EXE_qrisk")).arg("fit").output().unwrap();
    assert_eq!(st.status.code(), Some(EXIT_USAGE));
    assert!(String::from_utf8_lossy(&st.stderr).contains("Usage"));
}
