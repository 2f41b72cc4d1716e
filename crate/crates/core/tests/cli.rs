use std::path::Path;
use std::process::Command;

use serde_json::Value;
use wkbzeta::cli::{run, EXIT_ACCURACY, EXIT_FAILED, EXIT_OK, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("wkbzeta").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> Value {
    let (code, out, err) = call(args);
    assert_eq!(code, EXIT_OK, "{args:?}: {err}");
    serde_json::from_str(&out).unwrap()
}

fn assert_valid(schema: &str, value: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("schemas")
        .join(format!("{schema}.schema.json"));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(value).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{errors:?}");
}

#[test]
fn action_closed_form_example() {
    let v = json(&["action", "--N", "4", "--M", "2", "--u", "1", "--v", "1"]);
    assert!((v["value"].as_f64().unwrap() + 1.0 / 3.0).abs() < 1e-12);
    assert_valid("action", &v);
}

#[test]
fn action_numeric_matches_closed() {
    let closed = json(&["action", "--spec", "6 4 1 2 0", "--method", "closed"]);
    let numeric = json(&["action", "--spec", "6 4 1 2 0", "--method", "numeric"]);
    assert_eq!(closed["method"]["kind"], "ClosedAnomalous");
    assert_valid("action", &closed);
    assert_valid("action", &numeric);
    let d = closed["value"].as_f64().unwrap() - numeric["value"].as_f64().unwrap();
    assert!(d.abs() < 1e-7, "{d}");
}

#[test]
fn harmonic_zeta_example() {
    let v = json(&["zeta", "--harmonic", "--s", "2"]);
    assert!((v["value"].as_f64().unwrap() - std::f64::consts::PI.powi(2) / 8.0).abs() < 1e-8);
    assert_valid("zeta", &v);
    let (code, out, _) = call(&["zeta", "--harmonic", "--s", "1", "--skew", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("kind,s,E,value,err_est,tail_fraction\nskew,"));
}

#[test]
fn spectrum_json_and_csv() {
    let v = json(&["spectrum", "--N", "2", "--count", "6"]);
    assert_valid("spectrum", &v);
    for (k, e) in v["eigenvalues"].as_array().unwrap().iter().enumerate() {
        assert!((e["value"].as_f64().unwrap() - (2 * k + 1) as f64).abs() < 1e-6);
    }
    let (code, out, _) = call(&["spectrum", "--spec", "4 2 1 1 0", "--count", "3", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "k,parity,value,err_est");
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("0,even,1.39235"));
}

#[test]
fn poles_table() {
    let v = json(&["poles", "--N", "4", "--M", "2"]);
    assert_valid("poles", &v);
    assert_eq!(v["leading"]["sigma0"], "3/2");
    assert_eq!(v["subleading"]["sigma0"], "-1/2");
    let v = json(&["poles", "--N", "12", "--M", "10", "--window", "-3,8"]);
    assert_valid("poles", &v);
    assert_eq!(v["leading"]["sigma0"], "7/2");
}

#[test]
fn determinants_by_each_method() {
    let closed = json(&["det", "--N", "2", "--method", "closed", "--lambda", "1"]);
    assert_valid("det", &closed);
    assert!((closed["full"].as_f64().unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-12);
    let shot = json(&["det", "--N", "2", "--lambda", "1"]);
    assert_valid("det", &shot);
    assert!((shot["full"].as_f64().unwrap() - std::f64::consts::PI.sqrt()).abs() < 1e-6);
    let prod = json(&["det", "--spec", "4 0 1 0 1", "--method", "product", "--count", "256"]);
    assert_valid("det", &prod);
    assert_eq!(prod["relative_to_lambda0"], true);
    let d1 = json(&["det", "--spec", "4 0 1 0 1"])["log_full"].as_f64().unwrap();
    let d0 = json(&["det", "--spec", "4 0 1 0 0"])["log_full"].as_f64().unwrap();
    assert!((prod["log_full"].as_f64().unwrap() - (d1 - d0)).abs() < 1e-6);
}

#[test]
fn predictions() {
    let v = json(&["predict", "--family", "2,4", "--g", "1e-3"]);
    assert_valid("predict", &v);
    let slope = (1e-3f64.ln() - 4.0 * 2f64.ln()) / 2.0;
    assert!((v["det_slope"].as_f64().unwrap() - slope).abs() < 1e-12);
    assert!((v["log_det_ratio"].as_f64().unwrap() + 2.0 / 3e-3).abs() / (2.0 / 3e-3) < 1e-2);
    let v = json(&["predict", "--family", "2,6", "--g", "1e-2", "--quantity", "z1"]);
    assert!(v["z1"].is_f64());
    assert!(v["det_slope"].is_null());
}

#[test]
fn verify_short_grid_passes_and_validates() {
    let v = json(&["verify", "--family", "2,4", "--grid", "1e-1,1e-2"]);
    assert_valid("report", &v);
    assert!(v["verdicts"].as_array().unwrap().iter().all(|x| x["pass"] == true));
    let (code, out, _) = call(&["verify", "--family", "2,4", "--grid", "1e-1,1e-2", "--format", "csv"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("series,g,predicted,measured,residual\nZ1,0.1,"));
}

#[test]
fn failed_verdict_exits_nonzero() {
    let args = [
        "verify",
        "--family",
        "2,4",
        "--grid",
        "1e-1,1e-2",
        "--set",
        "z1_check_g=0.5",
        "--set",
        "z1_threshold=1e-6",
    ];
    let (code, out, err) = call(&args);
    assert_eq!(code, EXIT_FAILED);
    let report: Value = serde_json::from_str(&out).unwrap();
    assert!(report["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .any(|x| x["pass"] == false));
    assert!(err.contains("verification failed"));
}

#[test]
fn fig2_writes_both_panels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let (code, _, err) = call(&["fig2", "--grid", "1e-1,1e-2", "--out-dir", d, "--jobs", "1"]);
    assert_eq!(code, EXIT_OK, "{err}");
    let left = std::fs::read_to_string(dir.path().join("fig2_left.csv")).unwrap();
    let right = std::fs::read_to_string(dir.path().join("fig2_right.csv")).unwrap();
    assert!(left.starts_with("family,N,g,v,inv_v,ZP1,Z2,ZP2\n"));
    assert!(right.starts_with("family,N,g,log_g,Z1,Z1_predicted\n"));
    assert_eq!(left.lines().count(), 5);
    assert_eq!(right.lines().count(), 5);

    let mut rdr = csv::Reader::from_reader(right.as_bytes());
    for rec in rdr.records() {
        let rec = rec.unwrap();
        let z1: f64 = rec[4].parse().unwrap();
        let pred: f64 = rec[5].parse().unwrap();
        assert!((z1 - pred).abs() < 0.1, "{rec:?}");
    }

    // rerun is byte-identical
    let again = tempfile::tempdir().unwrap();
    let (code, _, _) = call(&[
        "fig2",
        "--grid",
        "1e-1,1e-2",
        "--out-dir",
        again.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(
        std::fs::read(again.path().join("fig2_left.csv")).unwrap(),
        left.as_bytes()
    );
    assert_eq!(
        std::fs::read(again.path().join("fig2_right.csv")).unwrap(),
        right.as_bytes()
    );
}

#[test]
fn output_file_and_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "format = csv\nspectrum_tol = 1e-8\n").unwrap();
    let out = dir.path().join("sub/spec.csv");
    let (code, stdout, _) = call(&[
        "spectrum",
        "--N",
        "2",
        "--count",
        "2",
        "--config",
        conf.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK);
    assert!(stdout.is_empty());
    assert!(std::fs::read_to_string(out)
        .unwrap()
        .starts_with("k,parity,value,err_est\n"));
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(call(&["nonsense"]).0, EXIT_USAGE);
    assert_eq!(call(&["spectrum"]).0, EXIT_USAGE);
    assert_eq!(call(&["spectrum", "--N", "3"]).0, EXIT_USAGE);
    assert_eq!(call(&["spectrum", "--spec", "4 2 1"]).0, EXIT_USAGE);
    assert_eq!(call(&["action", "--N", "4", "--set", "colour=red"]).0, EXIT_USAGE);
    assert_eq!(call(&["action", "--N", "4", "--set", "action_tol=0"]).0, EXIT_USAGE);
    assert_eq!(call(&["verify", "--family", "4"]).0, EXIT_USAGE);
    assert_eq!(call(&["det", "--N", "4", "--method", "closed"]).0, EXIT_USAGE);
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("fig2"));
}

#[test]
fn accuracy_failure_exits_3_with_diagnostic() {
    let (code, _, err) = call(&["spectrum", "--N", "4", "--count", "8", "--set", "spectrum_tol=1e-15"]);
    assert_eq!(code, EXIT_ACCURACY);
    let diag: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(diag["error"], "accuracy");
    assert!(diag["best_estimate"].is_f64());
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_wkbzeta");
    let ok = Command::new(bin)
        .args(["zeta", "--harmonic", "--s", "2"])
        .output()
        .unwrap();
    assert!(ok.status.success());
    let v: Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 1.2337005501361698).abs() < 1e-8);
    let bad = Command::new(bin).arg("bogus").output().unwrap();
    assert_eq!(bad.status.code(), Some(EXIT_USAGE));
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_wkbzeta");
    let run = Command::new(bin)
        .args(["fig2", "--grid", "1e-1"])
        .env(wkbzeta::config::OUT_DIR_ENV, dir.path())
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(dir.path().join("fig2_left.csv").exists());
}
