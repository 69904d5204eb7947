use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn reference_config(horizon: f64, bond: f64, stock: f64, targets: &[f64]) -> Value {
    json!({
        "market": {
            "riskless_rate_per_year": 0.05,
            "stock_drift_per_year": 0.15,
            "volatility_per_sqrt_year": 0.2,
            "buy_fee_fraction": 0.02,
            "sell_fee_fraction": 0.02,
            "horizon_years": horizon
        },
        "position": {"bond_dollars": bond, "stock_dollars": stock},
        "targets_dollars": targets
    })
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn tcmv(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tcmv"));
    cmd.args(args).env_remove("TCMV_OUT_DIR");
    if let Some(dir) = env_out {
        cmd.env("TCMV_OUT_DIR", dir);
    }
    cmd.output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn solve_reproduces_leveraged_example() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &reference_config(2.0, -1.0, 1.0, &[1.1]));
    let out = tmp.path().join("out");
    let res = tcmv(&["solve", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let sol = read_json(&out.join("solution.json"));
    let first = &sol[0];
    let ell = first["ell_star_dollars"].as_f64().unwrap();
    let trade = first["initial_trade_stock_dollars"].as_f64().unwrap();
    assert!((ell - 4.5069).abs() / 4.5069 < 0.01, "ell {ell}");
    assert!((trade - 4.3395).abs() / 4.3395 < 0.01, "trade {trade}");
    assert_eq!(first["initial_region"], "buy");
    assert_eq!(first["stay_put"], false);

    let feas = read_json(&out.join("feasibility.json"));
    assert_eq!(feas["feasible_targets"]["kind"], "unbounded");
    assert!(feas["z_hat_dollars"].is_null());
    assert!(out.join("boundaries.csv").exists() && out.join("schema.json").exists());
    assert!(!out.join("mc_report.json").exists() && !out.join("frontier.csv").exists());
}

#[test]
fn empty_feasible_set_exits_3() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &reference_config(0.2, 1.0, -1.0, &[0.5]));
    let out = tmp.path().join("out");
    let res = tcmv(&["solve", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&res.stderr);
    assert!(stderr.contains("empty"), "{stderr}");
    assert_eq!(read_json(&out.join("feasibility.json"))["feasible_targets"]["kind"], "empty");
    assert!(!out.join("boundaries.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.json");
    assert_eq!(tcmv(&["solve", missing.to_str().unwrap()], None).status.code(), Some(2));

    let mut cfg = reference_config(2.0, -1.0, 1.0, &[1.1]);
    cfg["market"]["horizon"] = json!(2.0);
    let path = write_config(tmp.path(), &cfg);
    let res = tcmv(&["solve", path.to_str().unwrap()], None);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("horizon"));

    let mut cfg = reference_config(2.0, -1.0, 1.0, &[1.1]);
    cfg["market"]["volatility_per_sqrt_year"] = json!(-0.2);
    let path = write_config(tmp.path(), &cfg);
    assert_eq!(tcmv(&["plotdata", path.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn identical_config_gives_identical_bytes() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = reference_config(2.0, -1.0, 1.0, &[1.1, 1.5]);
    cfg["grid"] = json!({"n_z": 200, "n_t": 400, "z_max_factor": 500.0});
    cfg["mc"] = json!({"n_paths": 500, "n_steps": 100, "seed": 9, "trace_paths": 2});
    cfg["frontier"] = json!({"z_min_dollars": 1.0, "z_max_dollars": 2.0, "points": 5});
    cfg["outputs"] = json!({"grid_dump_stride": 50});
    let path = write_config(tmp.path(), &cfg);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let res = tcmv(&["solve", path.to_str().unwrap(), "--out", dir.to_str().unwrap()], None);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    let mut names: Vec<String> =
        fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    for expected in ["mc_report.json", "frontier.csv", "grid.csv", "trace_0_0.csv", "trace_1_1.csv"] {
        assert!(names.iter().any(|n| n == expected), "{expected} missing from {names:?}");
    }
    for name in &names {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn plotdata_boundaries_and_frontier_are_well_formed() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &reference_config(2.0, 1.0, 0.0, &[]));
    let out = tmp.path().join("plots");
    let res = tcmv(&["plotdata", cfg.to_str().unwrap()], Some(&out));
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let (header, rows) = csv_rows(&out.join("boundaries.csv"));
    assert_eq!(header, ["t", "x_s_star", "x_b_star"]);
    let t: Vec<f64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert!(t.windows(2).all(|w| w[1] > w[0]));
    let sell: Vec<f64> = rows.iter().map(|r| r[1].parse().unwrap()).collect();
    assert!(sell.windows(2).all(|w| w[1] <= w[0]));
    let t0 = 2.0 - (1.02f64 / 0.98).ln() / 0.1;
    for (ti, row) in t.iter().zip(&rows) {
        if *ti > t0 + 1e-3 {
            assert_eq!(row[2], "-inf", "t = {ti}");
        }
        if *ti < t0 - 1e-3 {
            assert!(row[2].parse::<f64>().unwrap().is_finite(), "t = {ti}");
        }
    }

    let (header, rows) = csv_rows(&out.join("frontier.csv"));
    assert_eq!(header, ["z", "variance"]);
    assert_eq!(rows.len(), 25);
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() >= 0.0));
}

#[test]
fn out_flag_overrides_environment_default() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = reference_config(2.0, 1.0, 0.0, &[1.2]);
    cfg["grid"] = json!({"n_z": 100, "n_t": 200, "z_max_factor": 500.0});
    let path = write_config(tmp.path(), &cfg);
    let (env_dir, flag_dir) = (tmp.path().join("env"), tmp.path().join("flag"));
    let res = tcmv(&["solve", path.to_str().unwrap(), "--out", flag_dir.to_str().unwrap()], Some(&env_dir));
    assert!(res.status.success());
    assert!(flag_dir.join("solution.json").exists());
    assert!(!env_dir.exists());
}

#[test]
fn artifacts_match_schema_sidecar() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = reference_config(2.0, -1.0, 1.0, &[1.1]);
    cfg["grid"] = json!({"n_z": 200, "n_t": 400, "z_max_factor": 500.0});
    cfg["mc"] = json!({"n_paths": 100, "n_steps": 50, "seed": 1, "trace_paths": 1});
    cfg["frontier"] = json!({"z_min_dollars": 1.1, "z_max_dollars": 1.5, "points": 3});
    cfg["outputs"] = json!({"grid_dump_stride": 100});
    let path = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("out");
    assert!(tcmv(&["solve", path.to_str().unwrap(), "--out", out.to_str().unwrap()], None).status.success());
    let schema = read_json(&out.join("schema.json"));
    let files = schema["files"].as_object().unwrap();

    let keys = |v: &Value| -> Vec<String> {
        let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
        k.sort();
        k
    };
    for (name, columns) in [
        ("boundaries.csv", "boundaries.csv"),
        ("frontier.csv", "frontier.csv"),
        ("grid.csv", "grid.csv"),
        ("trace_0_0.csv", "trace_<target>_<path>.csv"),
    ] {
        let (mut header, _) = csv_rows(&out.join(name));
        header.sort();
        assert_eq!(header, keys(&files[columns]["columns"]), "{name}");
    }
    assert_eq!(keys(&read_json(&out.join("feasibility.json"))), keys(&files["feasibility.json"]["fields"]));
    assert_eq!(keys(&read_json(&out.join("solution.json"))[0]), keys(&files["solution.json"]["fields"]));
    let mc = read_json(&out.join("mc_report.json"));
    assert_eq!(keys(&mc[0]), keys(&files["mc_report.json"]["fields"]));
    assert_eq!(keys(&mc[0]["report"]), keys(&files["mc_report.json"]["fields"]["report"]));
}
