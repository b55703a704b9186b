use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn grainpdmp(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_grainpdmp"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GRAINPDMP_OUT_ROOT")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn topology_count_prints_the_number() {
    let dir = TempDir::new().unwrap();
    let out = grainpdmp(&["topology", "--count", "5"], dir.path());
    assert!(out.status.success());
    assert_eq!(stdout(&out).trim(), "5");
    let out = grainpdmp(&["topology", "--count", "7"], dir.path());
    assert_eq!(stdout(&out).trim(), "42");
}

#[test]
fn topology_report_checks_rules() {
    let dir = TempDir::new().unwrap();
    let out = grainpdmp(&["topology"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["rule_check"]["consistent"], true);
    assert_eq!(v["trees"][3]["encodings"].as_array().unwrap().len(), 5);

    let out = grainpdmp(&["topology", "--euler", "2", "--edges", "30"], dir.path());
    assert_eq!(stdout(&out).trim(), "5");
}

#[test]
fn validate_builtin_presets() {
    let dir = TempDir::new().unwrap();
    for preset in ["grain15-nd", "grain15-pd", "grain15-rd", "two-species-counter"] {
        let out = grainpdmp(&["validate-preset", "--preset", preset], dir.path());
        assert!(out.status.success(), "{preset}: {}", stderr(&out));
        let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
        assert_eq!(v["valid"], true);
    }
}

#[test]
fn preset_file_is_accepted() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("p.json"),
        r#"{"M":12,"weight_mode":"uncorrelated","edge_deletion":{"mode":"PD","beta":0.3}}"#,
    )
    .unwrap();
    let out = grainpdmp(&["validate-preset", "--preset", "p.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["species"].as_array().unwrap().len(), 11);
    assert_eq!(v["edge_deletion"]["beta"], 0.3);
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let args = |out: &'static str| {
        vec![
            "simulate", "--preset", "grain15-nd", "--n0", "1000", "--seed", "7", "--t-end", "0.1",
            "--graintrack", "--out", out,
        ]
    };
    for out in ["a", "b"] {
        let o = grainpdmp(&args(out), dir.path());
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for file in ["snapshots.json", "events.csv", "graintrack.csv"] {
        let a = fs::read(dir.path().join("a").join(file)).unwrap();
        let b = fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(!a.is_empty());
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let manifest = json(&dir.path().join("a/manifest.json"));
    assert_eq!(manifest["subcommand"], "simulate");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 3);

    let o = grainpdmp(&args("c").iter().map(|a| if *a == "7" { "8" } else { a }).collect::<Vec<_>>(), dir.path());
    assert!(o.status.success());
    assert_ne!(
        fs::read(dir.path().join("a/events.csv")).unwrap(),
        fs::read(dir.path().join("c/events.csv")).unwrap()
    );
}

#[test]
fn two_species_solve_reports_blow_up() {
    let dir = TempDir::new().unwrap();
    let out = grainpdmp(
        &["solve", "--preset", "two-species-counter", "--dt", "0.01", "--out", "s"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
    let err = stderr(&out);
    assert!(err.contains("T*="), "{err}");
    let report = json(&dir.path().join("s/report.json"));
    let t_star = report["blow_up"]["time"].as_f64().unwrap();
    assert!((t_star - 2.0).abs() <= 0.03, "T* = {t_star}");
    let manifest = json(&dir.path().join("s/manifest.json"));
    assert!(manifest["status"].as_str().unwrap().contains("blow-up"));
    let trajectory = fs::read_to_string(dir.path().join("s/trajectory.csv")).unwrap();
    assert!(trajectory.starts_with("t,F_1,F_2,F,A,P,L_1\n"));
    assert!(dir.path().join("s/densities/density_0000.csv").exists());
}

#[test]
fn grain_solve_with_both_flux_paths() {
    let dir = TempDir::new().unwrap();
    let out = grainpdmp(
        &[
            "solve", "--preset", "grain15-pd", "--t-end", "0.02", "--support", "0.2",
            "--flux-path", "both", "--out", "s",
        ],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&dir.path().join("s/report.json"));
    let diff = report["conservation"]["max_path_difference"].as_f64().unwrap();
    assert!(diff < 1e-10, "{diff}");
    let header = fs::read_to_string(dir.path().join("s/trajectory.csv")).unwrap();
    let header = header.lines().next().unwrap();
    assert!(header.starts_with("t,F_2,F_3,"));
    assert!(header.ends_with("F,A,P,L_2,L_3,L_4,L_5"), "{header}");
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let cases: &[&[&str]] = &[
        &["simulate", "--no-such-flag"],
        &["simulate", "--preset", "missing-preset"],
        &["simulate", "--n0", "0"],
        &["simulate", "--preset", "grain15-nd", "--alpha", "1.0"],
        &["solve", "--dx", "0.1", "--dt", "0.1"],
        &["topology", "--count", "1"],
        &["fit", "--graintrack", "nowhere.csv"],
    ];
    for args in cases {
        let out = grainpdmp(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
}

#[test]
fn config_file_overrides_flags() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"n0": 150, "seed": 11}"#).unwrap();
    let out = grainpdmp(
        &["simulate", "--n0", "5000", "--t-end", "0.01", "--config", "cfg.json", "--out", "r"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let snaps = json(&dir.path().join("r/snapshots.json"));
    assert_eq!(snaps["n0"], 150);
    assert_eq!(snaps["seed"], 11);
    assert_eq!(snaps["snapshots"][0]["count"], 150);

    fs::write(dir.path().join("bad.json"), r#"{"grains": 3}"#).unwrap();
    let out = grainpdmp(&["simulate", "--config", "bad.json", "--out", "r"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("grains"));
}

#[test]
fn output_root_from_environment() {
    let dir = TempDir::new().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_grainpdmp"))
        .args(["simulate", "--n0", "50", "--t-end", "0.01"])
        .current_dir(dir.path())
        .env("GRAINPDMP_OUT_ROOT", dir.path().join("root"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("root/simulate/manifest.json").exists());
}

#[test]
fn ensemble_writes_replicas_and_aggregate() {
    let dir = TempDir::new().unwrap();
    let out = grainpdmp(
        &["simulate", "--n0", "200", "--t-end", "0.05", "--ensemble", "3", "--out", "e"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    for i in 0..3 {
        let snaps = json(&dir.path().join(format!("e/replica-{i:03}/snapshots.json")));
        assert_eq!(snaps["seed"], i);
    }
    let agg = json(&dir.path().join("e/aggregate.json"));
    assert_eq!(agg["replicas"].as_array().unwrap().len(), 3);
    assert_eq!(agg["mean_counts"][0], 200.0);
}

#[test]
fn gen_data_fit_and_compare() {
    let dir = TempDir::new().unwrap();
    let gen = |preset: &str, seed: &str, out: &str| {
        let o = grainpdmp(
            &[
                "gen-data", "--preset", preset, "--beta", "2", "--n0", "4000", "--t-end", "0.2",
                "--steps", "40", "--seed", seed, "--out", out,
            ],
            dir.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
    };
    gen("grain15-pd", "1", "pd");
    let truth = json(&dir.path().join("pd/truth.json"));
    assert_eq!(truth["preset"]["edge_deletion"]["beta"], 2.0);

    let o = grainpdmp(
        &["fit", "--graintrack", "pd/graintrack.csv", "--burn-in", "0.1", "--out", "fit"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let fit = json(&dir.path().join("fit/fit.json"));
    assert!(fit["alpha"].as_f64().unwrap() > 0.0);
    assert!(fit["beta_pd"].as_f64().unwrap() > 0.0);
    assert_eq!(fit["delta_e"].as_array().unwrap().len(), 40);

    let o = grainpdmp(
        &[
            "compare", "--a", "pd/graintrack.csv", "--b", "pd/graintrack.csv", "--time", "0.1",
            "--out", "cmp",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let metrics = json(&dir.path().join("cmp/metrics.json"));
    assert_eq!(metrics["entries"][0]["tv"], 0.0);
    assert_eq!(metrics["entries"][0]["ks"]["6"], 0.0);
    let hist = fs::read_to_string(dir.path().join("cmp/areas_0_6.csv")).unwrap();
    assert_eq!(hist.lines().count(), 101);
    assert!(dir.path().join("cmp/topology_0.csv").exists());
    assert!(dir.path().join("cmp/coarsening.csv").exists());
}

#[test]
fn gen_weights_builds_a_usable_preset() {
    let dir = TempDir::new().unwrap();
    let p = "0\n0.01\n0.05\n0.2\n0.3\n0.2\n0.1\n0.06\n0.04\n0.02\n0.01\n0.01\n0\n0\n0\n";
    let c = "0\n0\n0.02\n0.1\n0.25\n0.3\n0.18\n0.08\n0.04\n0.02\n0.01\n0\n0\n0\n0\n";
    fs::write(dir.path().join("p.csv"), p).unwrap();
    fs::write(dir.path().join("c.csv"), c).unwrap();
    let o = grainpdmp(
        &["gen-weights", "--p", "p.csv", "--c", "c.csv", "--donor", "2=3", "--out", "w"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let weights = json(&dir.path().join("w/weights.json"));
    for key in ["0", "2", "3", "4", "5"] {
        let row = weights[key].as_array().unwrap();
        assert_eq!(row.len(), 15);
        let sum: f64 = row.iter().map(|v| v.as_f64().unwrap()).sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }
    let residuals = json(&dir.path().join("w/residuals.json"));
    assert!(residuals["3"].as_f64().unwrap() < 1e-12);

    let o = grainpdmp(&["validate-preset", "--preset", "w/preset.json"], dir.path());
    assert!(o.status.success(), "{}", stdout(&o));
    let o = grainpdmp(
        &["simulate", "--weights", "w/weights.json", "--n0", "300", "--t-end", "0.02", "--out", "s"],
        dir.path(),
    );
    assert!(o.status.success(), "{}", stderr(&o));
}
