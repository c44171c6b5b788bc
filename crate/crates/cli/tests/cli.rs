//! End-to-end runs of the `qrt` binary: exit status, files and determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const LINEAR: &str = "[profile]\nkind = \"linear\"\nslope = 1.0\nh = 1.0\nmollifier_width = 0.1\n";

fn qrt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qrt"))
        .args(args)
        .env("QRT_LOG", "error")
        .output()
        .expect("binary runs")
}

fn config(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

/// Runs `cmd` with `cfg` into `<tmp>/<out>` and returns (exit status, stdout JSON).
fn run(dir: &TempDir, cmd: &str, cfg: &Path, out: &str, extra: &[&str]) -> (i32, Option<Value>) {
    let out_dir = dir.path().join(out);
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out_dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = qrt(&args);
    let json = serde_json::from_slice(&o.stdout).ok();
    (o.status.code().unwrap(), json)
}

fn read_json(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn print_defaults_is_a_loadable_config() {
    let o = qrt(&["--print-defaults"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    let table: toml::Table = toml::from_str(&text).unwrap();
    for key in [
        "profile",
        "params",
        "grid",
        "dispersion",
        "simulate",
        "verify",
        "exponents",
        "output",
    ] {
        assert!(table.contains_key(key), "missing [{key}]");
    }
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "defaults.toml", &text);
    let (code, json) = run(&dir, "exponents", &cfg, "out", &[]);
    assert_eq!(code, 0);
    assert_eq!(json.unwrap().as_array().unwrap().len(), 5);
}

#[test]
fn usage_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    assert_eq!(qrt(&[]).status.code(), Some(2));
    assert_eq!(qrt(&["no-such-command"]).status.code(), Some(2));
    let missing = dir.path().join("missing.toml");
    assert_eq!(run(&dir, "threshold", &missing, "o1", &[]).0, 2);
    let yaml = config(&dir, "c.yaml", LINEAR);
    assert_eq!(run(&dir, "threshold", &yaml, "o2", &[]).0, 2);
    let typo = config(&dir, "typo.toml", "[grid]\nm = 32\n");
    assert_eq!(run(&dir, "threshold", &typo, "o3", &[]).0, 2);
    let params = config(&dir, "params.toml", "[params]\ng = -1.0\nmu = 1.0\neps = 0.1\n");
    assert_eq!(run(&dir, "threshold", &params, "o4", &[]).0, 2);
    let strip = config(
        &dir,
        "strip.toml",
        "[profile]\nkind = \"linear\"\nslope = 1.0\nh = 1.0\nmollifier_width = 0.5\n",
    );
    assert_eq!(run(&dir, "validate-profile", &strip, "o5", &[]).0, 2);
}

#[test]
fn validate_profile_exit_codes() {
    let dir = TempDir::new().unwrap();
    let lin = config(&dir, "lin.toml", LINEAR);
    let (code, json) = run(&dir, "validate-profile", &lin, "lin", &[]);
    assert_eq!(code, 0);
    assert_eq!(json.unwrap()["passed"], true);
    let table = fs::read_to_string(dir.path().join("lin/profile.csv")).unwrap();
    assert!(table.starts_with("x3,rho,rho_d1,rho_d2\n"));
    assert_eq!(table.lines().count(), 202);

    let flat = config(&dir, "flat.toml", "[profile]\nkind = \"linear\"\nslope = 0.0\nh = 1.0\n");
    let (code, json) = run(&dir, "validate-profile", &flat, "flat", &[]);
    assert_eq!(code, 1);
    let failed = json.unwrap()["failed"].clone();
    assert!(failed.as_array().unwrap().contains(&Value::from("rt_condition")), "{failed}");

    let bad = config(&dir, "bad.toml", "[profile\nkind = ");
    assert_eq!(run(&dir, "validate-profile", &bad, "bad", &[]).0, 2);

    // A condition left out of `require` does not decide the status.
    let relaxed = config(
        &dir,
        "relaxed.json",
        r#"{"profile": {"kind": "linear", "slope": 0.0, "h": 1.0}, "validate": {"require": ["positive"]}}"#,
    );
    assert_eq!(run(&dir, "validate-profile", &relaxed, "relaxed", &[]).0, 0);
}

#[test]
fn threshold_outputs_and_degenerate_refusal() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "lin.toml", &format!("{LINEAR}[grid]\nn = 64\n"));
    let (code, json) = run(&dir, "threshold", &cfg, "out", &["--gnuplot-script"]);
    assert_eq!(code, 0);
    let json = json.unwrap();
    let eps_c = json["eps_c"].as_f64().unwrap();
    let a3 = json["a3"].as_f64().unwrap();
    assert!((eps_c - a3.sqrt()).abs() < 1e-14);
    assert!(eps_c < json["bound_linear"].as_f64().unwrap());
    assert!(eps_c < json["bound_general"].as_f64().unwrap());
    assert_eq!(json["n"], 64);
    assert_eq!(read_json(dir.path().join("out/threshold.json")), json);
    let phi = fs::read_to_string(dir.path().join("out/phi_star.csv")).unwrap();
    assert_eq!(phi.lines().count(), 65);
    assert!(dir.path().join("out/phi_star.gp").exists());

    let deg = config(
        &dir,
        "deg.toml",
        "[profile]\nkind = \"degenerate\"\namplitude = 1.0\ntau = 1.0\ncenter = 0.5\nhalf_width = 0.2\nh = 1.0\n[grid]\nn = 32\n",
    );
    let o = qrt(&[
        "threshold",
        "--config",
        deg.to_str().unwrap(),
        "--out",
        dir.path().join("deg").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("stabilizing condition"));
}

#[test]
fn dispersion_is_deterministic_across_job_counts() {
    let dir = TempDir::new().unwrap();
    let cfg = config(
        &dir,
        "d.toml",
        &format!("{LINEAR}[grid]\nn = 24\n[params]\ng = 1.0\nmu = 1.0\neps = 0.1\n[dispersion]\nkappa_min = 0.2\nkappa_max = 30.0\ncount = 8\neigenvalues = 2\n"),
    );
    let (code, json) = run(&dir, "dispersion", &cfg, "a", &["--jobs", "1"]);
    assert_eq!(code, 0);
    let json = json.unwrap();
    assert!(json["max_growth"].as_f64().unwrap() > 0.0);
    assert!(json["kappa_c"].as_f64().is_some(), "{json}");
    assert_eq!(run(&dir, "dispersion", &cfg, "b", &["--jobs", "3"]).0, 0);
    for f in ["dispersion.csv", "dispersion.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        let b = fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs between job counts");
    }
    let csv = fs::read_to_string(dir.path().join("a/dispersion.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("kappa,re_sigma,im_sigma"));
    assert_eq!(csv.lines().count(), 1 + 8 * 2);
}

#[test]
fn simulate_outputs_and_kappa_zero() {
    let dir = TempDir::new().unwrap();
    let body = format!("{LINEAR}[grid]\nn = 24\n[simulate]\nkappa = 2.0\nt_end = 0.2\ndt = 0.01\n");
    let cfg = config(&dir, "s.toml", &body);
    let (code, json) = run(&dir, "simulate", &cfg, "a", &[]);
    assert_eq!(code, 0);
    let json = json.unwrap();
    assert!(json["fitted_rate"].as_f64().unwrap().is_finite());
    assert!(json["max_balance_residual"].as_f64().unwrap() < 0.1);
    assert_eq!(json["samples"], 21);
    let csv = fs::read_to_string(dir.path().join("a/trajectory.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,energy,kinetic,dissipation,amplitude,balance_residual"));
    assert_eq!(csv.lines().count(), 22);
    assert_eq!(run(&dir, "simulate", &cfg, "b", &[]).0, 0);
    assert_eq!(
        fs::read(dir.path().join("a/trajectory.csv")).unwrap(),
        fs::read(dir.path().join("b/trajectory.csv")).unwrap()
    );

    let k0 = config(&dir, "k0.toml", &body.replace("kappa = 2.0", "kappa = 0.0"));
    assert_eq!(run(&dir, "simulate", &k0, "k0", &[]).0, 1);
    let zero = config(&dir, "zero.toml", &format!("{body}[simulate.seed]\nkind = \"zero\"\n"));
    assert_eq!(run(&dir, "simulate", &zero, "zero", &[]).0, 1);
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap()
}

#[test]
fn verify_default_passes_and_coarse_grid_fails() {
    let dir = TempDir::new().unwrap();
    let o = qrt(&["verify", "--out", dir.path().join("default").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["checks"].as_array().unwrap().len(), 5);
    // Default eps sits below eps_c: the energy is not coercive there, as expected.
    let c = check(&report, "coercivity");
    assert_eq!(c["passed"], true);
    assert!(c["residual"].as_f64().unwrap() < 0.0);
    assert!(c["detail"].as_str().unwrap().contains("not coercive"));

    let coarse = config(&dir, "coarse.toml", "[grid]\nn = 16\n");
    let (code, json) = run(&dir, "verify", &coarse, "coarse", &[]);
    assert_eq!(code, 1);
    let json = json.unwrap();
    assert_eq!(json["passed"], false);
    assert_eq!(check(&json, "identity")["passed"], false);

    let above = config(&dir, "above.toml", "[params]\ng = 1.0\nmu = 1.0\neps = 0.5\n");
    let (code, json) = run(&dir, "verify", &above, "above", &[]);
    assert_eq!(code, 0);
    assert!(check(&json.unwrap(), "coercivity")["residual"].as_f64().unwrap() > 0.0);
}

#[test]
fn exponents_report_and_domain_error() {
    let dir = TempDir::new().unwrap();
    let cfg = config(&dir, "e.toml", "[exponents]\nthetas = [0.02, 0.06]\n");
    let (code, json) = run(&dir, "exponents", &cfg, "out", &[]);
    assert_eq!(code, 0);
    let json = json.unwrap();
    let reports = json.as_array().unwrap();
    assert_eq!(reports[0]["checks"]["gap"], true);
    assert_eq!(reports[1]["checks"]["gap"], false);
    assert_eq!(reports[0]["s"].as_f64().unwrap(), 0.98);
    let bad = config(&dir, "bad.toml", "[exponents]\nthetas = [0.0]\n");
    assert_eq!(run(&dir, "exponents", &bad, "bad", &[]).0, 1);
}
