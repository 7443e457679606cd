use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
[experiment]
rho_grid = [0.2, 0.6]
seeds = 2
length = 400
hidden_width = 4
ar_configs = [{ order = 1 }, { order = 2, rho2 = 0.1 }]

[experiment.train]
epochs = 3
batch_size = 64

[theory]
rho_grid = [0.0, 0.5]
lags = [3]

[residual]
rho_grid = [0.0, 0.5]
samples = [2000]

[mode_decay]
rho_grid = [0.3]
steps = 500
"#;

fn acbias(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_acbias")).args(args).current_dir(dir).output().expect("binary runs")
}

fn with_config(dir: &Path) -> String {
    let path = dir.join("tiny.toml");
    fs::write(&path, TINY).unwrap();
    path.to_string_lossy().into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = acbias(&["--help"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("rho-sweep"));
    assert_eq!(acbias(&["--version"], dir.path()).status.code(), Some(0));
    let o = acbias(&["mode-decay", "--help"], dir.path());
    assert!(String::from_utf8_lossy(&o.stdout).contains("label,mode,lambda"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(acbias(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(acbias(&["theory", "--jobs", "many"], dir.path()).status.code(), Some(1));

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[experiment]\nseedz = 3\n").unwrap();
    let o = acbias(&["theory", "--config", bad.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    assert!(stderr(&o).contains("seedz"));

    let empty = dir.path().join("empty.toml");
    fs::write(&empty, "[experiment]\nrho_grid = []\n").unwrap();
    let o = acbias(&["rho-sweep", "--config", empty.to_str().unwrap(), "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("rho_grid is empty"));

    let o = acbias(&["theory", "--config", "tiny.toml", "--paper-defaults"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(acbias(&["gen", "--seeds", "0", "--out", "o"], dir.path()).status.code(), Some(1));
}

#[test]
fn theory_residual_and_mode_decay_verify() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path());
    for (cmd, file) in [("theory", "theory_condition.csv"), ("residual", "residual.csv"), ("mode-decay", "mode_decay.csv")] {
        let out = format!("out_{cmd}");
        let o = acbias(&[cmd, "--config", &cfg, "--out", &out], dir.path());
        assert_eq!(o.status.code(), Some(0), "{cmd}: {}", stderr(&o));
        let root = dir.path().join(&out);
        assert!(root.join(file).exists());
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(root.join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["command"], cmd);
        assert_eq!(manifest["verification"], true);
        assert!(manifest["artifacts"].as_array().unwrap().iter().any(|a| a["path"] == file));
    }
    let csv = fs::read_to_string(dir.path().join("out_theory/theory_condition.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let decay = fs::read_to_string(dir.path().join("out_mode-decay/mode_decay.csv")).unwrap();
    assert!(decay.contains("diag(1,10)"));
}

#[test]
fn epoch_dynamics_is_deterministic_across_job_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path());
    for (out, jobs) in [("a", "1"), ("b", "3")] {
        let o = acbias(&["epoch-dynamics", "--config", &cfg, "--out", out, "--jobs", jobs], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let a = fs::read_to_string(dir.path().join("a/manifest.json")).unwrap();
    let b = fs::read_to_string(dir.path().join("b/manifest.json")).unwrap();
    assert_eq!(a, b);
    let manifest: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(manifest["seeds"], serde_json::json!([0, 1]));
    assert_eq!(manifest["verification"], serde_json::Value::Null);
    let table = fs::read_to_string(dir.path().join("a/epoch_dynamics.csv")).unwrap();
    // 2 variants x 2 rho x epochs 1..=3
    assert_eq!(table.lines().count(), 1 + 2 * 2 * 3);
    assert!(dir.path().join("a/runs/N1/dct-kan_rho0.6_seed1.csv").exists());
    assert!(dir.path().join("a/plots/epoch_mse_kan.svg").exists());
}

#[test]
fn rho_sweep_writes_wide_tables_per_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path());
    let o = acbias(&["rho-sweep", "--config", &cfg, "--out", "s", "--seeds", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for n in [1, 2] {
        let mse = fs::read_to_string(dir.path().join(format!("s/mse_N{n}.csv"))).unwrap();
        let mut lines = mse.lines();
        assert_eq!(lines.next(), Some("rho1,kan_test_mse_mean,kan_test_mse_sd,dct-kan_test_mse_mean,dct-kan_test_mse_sd"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 2);
        assert!(rows[0].starts_with("0.2,"));
        // one seed: population sd is zero
        assert_eq!(rows[0].split(',').nth(2), Some("0"));
        let comp = fs::read_to_string(dir.path().join(format!("s/components_N{n}.csv"))).unwrap();
        assert_eq!(comp.lines().next().unwrap().split(',').count(), 1 + 2 * 3 * 2);
        assert!(dir.path().join(format!("s/plots/components_N{n}.svg")).exists());
    }
}

#[test]
fn gen_exports_both_variants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = with_config(dir.path());
    let o = acbias(&["gen", "--config", &cfg, "--out", "g"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let kan = fs::read_to_string(dir.path().join("g/datasets/N2_rho0.6_seed0_kan.csv")).unwrap();
    let dct = fs::read_to_string(dir.path().join("g/datasets/N2_rho0.6_seed0_dct-kan.csv")).unwrap();
    assert!(kan.starts_with("t,x_lag0,x_lag1,x_lag2,x_lag3,x_lag4,x_lag5,y,"));
    assert_eq!(kan.lines().count(), dct.lines().count());
    assert_ne!(kan, dct);
    assert!(!dir.path().join("g/datasets/N1_rho0.2_seed1_kan.csv").exists());
    let o = acbias(&["gen", "--config", &cfg, "--out", "g2", "--seeds", "2"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("g2/datasets/N1_rho0.2_seed1_kan.csv").exists());
}

#[test]
fn malformed_theory_grid_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("g.toml"), "[theory]\ngrids = [1]\n").unwrap();
    let o = acbias(&["theory", "--config", "g.toml", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("o/manifest.json").exists());
}
