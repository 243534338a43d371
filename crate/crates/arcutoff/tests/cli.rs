//! End-to-end runs of the binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_arcutoff"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn swap_model() -> Value {
    json!({
        "d": 2,
        "p": [[0.0, 1.0], [1.0, 0.0]],
        "e": 0.55,
        "sigma": 1.0,
        "scan": { "mode": "deterministic-cycle" }
    })
}

fn complete3_model() -> Value {
    json!({
        "d": 3,
        "p": [0.0, 0.5, 0.5, 0.5, 0.0, 0.5, 0.5, 0.5, 0.0],
        "e": 0.5,
        "sigma": 1.0,
        "noise": { "kind": "gaussian" },
        "scan": { "mode": "random-scan" }
    })
}

fn write_config(dir: &TempDir, value: &Value) -> PathBuf {
    let path = dir.path().join("config.json");
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    bin().args(args).arg("--config").arg(config).arg("--out").arg(out).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let head = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect();
    (head, rows)
}

fn column(head: &[String], name: &str) -> usize {
    head.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn missing_seed_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &json!({ "model": swap_model() }));
    let o = run(&["estimate-alpha"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed required"), "{}", stderr(&o));
}

#[test]
fn missing_config_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = bin().args(["simulate", "--seed", "1", "--out"]).arg(dir.path()).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_models_exit_2() {
    let dir = TempDir::new().unwrap();
    let mut unit_damping = swap_model();
    unit_damping["e"] = json!(1.0);
    let mut self_loop = swap_model();
    self_loop["p"] = json!([[0.5, 0.5], [1.0, 0.0]]);
    let mut bad_rows = swap_model();
    bad_rows["p"] = json!([[0.0, 0.9], [1.0, 0.0]]);
    let cases = [
        json!({ "model": unit_damping, "seed": 1 }),
        json!({ "model": self_loop, "seed": 1 }),
        json!({ "model": bad_rows, "seed": 1 }),
        json!({ "model": swap_model(), "seed": 1, "unknown_section": {} }),
    ];
    for case in cases {
        let cfg = write_config(&dir, &case);
        for cmd in ["tv-curve", "verify"] {
            let o = run(&[cmd], &cfg, &dir.path().join("out"));
            assert_eq!(o.status.code(), Some(2), "{cmd} with {case}: {}", stderr(&o));
            assert!(stderr(&o).contains("invalid configuration"), "{}", stderr(&o));
        }
    }
    let cfg = write_config(&dir, &json!({ "model": swap_model(), "seed": 1, "curve": { "n": [0.5] } }));
    let o = run(&["tv-curve"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn corrupted_json_exits_2() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, "{ \"model\": { \"d\": 2, ").unwrap();
    let o = run(&["simulate", "--seed", "3"], &cfg, &dir.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn alpha_on_reference_model() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run(&["estimate-alpha"], &configs().join("d2_reference.json"), &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = read_json(&out.join("alpha.json"));
    let alpha = a["alpha_hat"].as_f64().unwrap();
    assert!((alpha + 0.597837).abs() < 1e-4, "alpha_hat = {alpha}");
    assert!(String::from_utf8_lossy(&o.stdout).contains("alpha_hat = -0.5978"));
    let exact = a["exact_references"]["deterministic-cycle"].as_f64().unwrap();
    assert!((exact - 0.55f64.ln()).abs() < 1e-15);
    assert!((a["exact_references"]["random-scan"].as_f64().unwrap() - 0.5 * 0.55f64.ln()).abs() < 1e-15);

    let cfg = write_config(&dir, &json!({ "model": swap_model(), "seed": 5, "alpha": { "n_steps": 400000 } }));
    let out = dir.path().join("out_random");
    let o = run(&["estimate-alpha", "--random-scan"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let a = read_json(&out.join("alpha.json"));
    let (alpha, se) = (a["alpha_hat"].as_f64().unwrap(), a["std_error"].as_f64().unwrap());
    assert_eq!(a["scan"], "random-scan");
    let half_log = 0.5 * 0.55f64.ln();
    assert!((alpha - half_log).abs() <= 3.0 * se, "random-scan alpha_hat = {alpha} +- {se}");
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &json!({ "model": swap_model(), "seed": 11, "alpha": { "n_steps": 1000 } }));
    let out = dir.path().join("out");
    let o = run(&["estimate-alpha", "--seed", "42"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let echo = read_json(&out.join("resolved_config.json"));
    assert_eq!(echo["seed"], 42);
    assert_eq!(echo["config"]["seed"], 42);
    assert_eq!(echo["config"]["model"]["d"], 2);
    assert_eq!(echo["config"]["curve"]["k_max"], 60);
}

#[test]
fn geometric_sizes_curves() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run(&["tv-curve"], &configs().join("geometric_n.json"), &out);
    assert!(o.status.success(), "{}", stderr(&o));

    let svg = fs::read_to_string(out.join("curves.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).expect("well-formed SVG");
    let polylines = doc.descendants().filter(|n| n.has_tag_name("polyline")).count();
    assert_eq!(polylines, 10);

    let summary = read_json(&out.join("tv_curve.json"));
    assert_eq!(summary["mode"], "exact");
    let curves = summary["curves"].as_array().unwrap();
    assert_eq!(curves.len(), 10);
    for c in curves {
        let (head, rows) = read_csv(&out.join(c["file"].as_str().unwrap()));
        let tv = column(&head, "tv");
        let values: Vec<f64> = rows.iter().map(|r| r[tv].parse().unwrap()).collect();
        assert_eq!(values.len(), 81);
        assert_eq!(values[0], 1.0);
        assert!(*values.last().unwrap() < 0.01, "curve {} ends at {}", c["n"], values.last().unwrap());
        assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    }
    let predicted = 5f64.ln() / 0.597837;
    for s in summary["spacings_0_5"].as_array().unwrap() {
        let s = s.as_f64().unwrap();
        assert!((s - predicted).abs() < 0.01, "spacing {s} vs {predicted}");
    }
}

#[test]
fn zero_steps_gives_one_point() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, &json!({ "model": swap_model(), "seed": 1, "curve": { "n": [100.0], "k_max": 0 } }));
    let out = dir.path().join("out");
    let o = run(&["tv-curve"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let (head, rows) = read_csv(&out.join("curve_00.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][column(&head, "k")], "0");
    assert_eq!(rows[0][column(&head, "tv")], "1");
}

#[test]
fn bracket_mode_in_three_dimensions() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &json!({ "model": complete3_model(), "seed": 3, "curve": { "n": [100.0], "k_max": 12, "replicas": 1000 } }),
    );
    let out = dir.path().join("out");
    let o = run(&["tv-curve"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_json(&out.join("tv_curve.json"))["mode"], "bracket");
    let (head, rows) = read_csv(&out.join("curve_00.csv"));
    assert_eq!(rows.len(), 13);
    for r in &rows {
        assert!(r[column(&head, "tv")].is_empty());
        let lo: f64 = r[column(&head, "tv_lower")].parse().unwrap();
        let lo_ci: f64 = r[column(&head, "lower_ci")].parse().unwrap();
        let up: f64 = r[column(&head, "tv_upper")].parse().unwrap();
        let up_ci: f64 = r[column(&head, "upper_ci")].parse().unwrap();
        assert!(lo - lo_ci <= up + up_ci, "row {r:?}");
    }
    let svg = fs::read_to_string(out.join("curves.svg")).unwrap();
    let doc = roxmltree::Document::parse(&svg).unwrap();
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polyline")).count(), 1);
    assert_eq!(doc.descendants().filter(|n| n.has_tag_name("polygon")).count(), 1);
}

#[test]
fn outputs_do_not_depend_on_threads() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &json!({
            "model": complete3_model(),
            "seed": 99,
            "bounds": { "n": 50.0, "k": [3, 6, 9], "replicas": 1000 },
            "simulate": { "k": 20, "replicas": 50, "stationary_samples": 50 },
        }),
    );
    for cmd in ["tv-bounds", "simulate"] {
        let mut dirs = Vec::new();
        for threads in ["1", "3", "1"] {
            let out = dir.path().join(format!("{cmd}_{threads}_{}", dirs.len()));
            let o = run(&[cmd, "--threads", threads], &cfg, &out);
            assert!(o.status.success(), "{}", stderr(&o));
            dirs.push(out);
        }
        let mut names: Vec<_> = fs::read_dir(&dirs[0]).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(names.len() >= 3);
        for other in &dirs[1..] {
            for name in &names {
                let a = fs::read(dirs[0].join(name)).unwrap();
                let b = fs::read(other.join(name)).unwrap();
                assert!(a == b, "{cmd}: {name:?} differs");
            }
        }
    }
}

#[test]
fn simulate_files() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &json!({ "model": complete3_model(), "seed": 2, "simulate": { "k": 15, "replicas": 20, "stationary_samples": 30 } }),
    );
    let out = dir.path().join("out");
    let o = run(&["simulate"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let (head, rows) = read_csv(&out.join("trajectory.csv"));
    assert_eq!(head, ["step", "index", "x_1", "x_2", "x_3"]);
    assert_eq!(rows.len(), 16);
    assert!(rows[1..].iter().all(|r| ["1", "2", "3"].contains(&r[1].as_str())));
    assert_eq!(read_csv(&out.join("final_states.csv")).1.len(), 20);
    let (head, rows) = read_csv(&out.join("stationary.csv"));
    assert_eq!(rows.len(), 30);
    assert!(rows.iter().all(|r| r[column(&head, "truncated")] == "false"));
}

#[test]
fn profile_with_fixed_and_estimated_alpha() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        &json!({
            "model": swap_model(),
            "seed": 4,
            "profile": { "n": [1000.0, 5000.0], "beta": [-5.0, 0.0, 5.0], "alpha": -0.597837, "replicas": 1000 },
        }),
    );
    let out = dir.path().join("out");
    let o = run(&["cutoff-profile"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = read_json(&out.join("profile.json"));
    assert_eq!(p["alpha"]["source"], "exact-reference");
    let (head, rows) = read_csv(&out.join("profile.csv"));
    assert_eq!(rows.len(), 6);
    let tv: Vec<f64> = rows.iter().map(|r| r[column(&head, "tv_exact")].parse().unwrap()).collect();
    assert!(tv[0] > 0.99 && tv[2] < 0.01, "{tv:?}");
    assert!(p["spacing"]["mean_spacing"].as_f64().unwrap() > 2.6);

    let cfg = write_config(
        &dir,
        &json!({
            "model": complete3_model(),
            "seed": 4,
            "alpha": { "n_steps": 50000 },
            "profile": { "n": [1000.0], "beta": [0.0], "replicas": 1000 },
        }),
    );
    let out = dir.path().join("out_estimated");
    let o = run(&["cutoff-profile"], &cfg, &out);
    assert!(o.status.success(), "{}", stderr(&o));
    let p = read_json(&out.join("profile.json"));
    assert_eq!(p["alpha"]["source"], "estimated");
    assert!(p["alpha"]["value"].as_f64().unwrap() < 0.0);
    assert_eq!(p["rows"][0]["method"], "bracket");
}

#[test]
fn verify_and_negative_control() {
    let dir = TempDir::new().unwrap();
    let cfg = configs().join("d2_reference.json");
    let out = dir.path().join("out");
    let o = run(&["verify"], &cfg, &out);
    assert!(o.status.success(), "{}\n{}", String::from_utf8_lossy(&o.stdout), stderr(&o));
    assert_eq!(read_json(&out.join("verify.json"))["passed"], true);

    let out = dir.path().join("out_negative");
    let o = run(&["verify", "--negative-control"], &cfg, &out);
    assert_eq!(o.status.code(), Some(1));
    let report = read_json(&out.join("verify.json"));
    assert_eq!(report["passed"], false);
    let failed: Vec<&str> = report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"] == false)
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert_eq!(failed, ["stationarity"]);
}
