use std::fs;
use std::path::Path;
use std::process::Command;

use disent_cli::config::parse_config;
use disent_cli::run::sweep_header;
use disent_cli::RunConfig;

const BIN: &str = env!("CARGO_BIN_EXE_disent");

const SMALL_SWEEP: &str = r#"
command = "sweep"
[model]
delta = 0.0
omega1 = 0.5
g = 0.001
[damping.a]
gamma1 = 0.01
gamma_phi = 1e-6
n0 = 10.0
[damping.b]
gamma1 = 0.1
gamma_phi = 1e-5
n0 = 1e-4
[sweep.delta]
min = -1.0
max = 1.0
n = 5
[sweep.omega1]
min = 0.2
max = 1.0
n = 3
"#;

const SMALL_SDE: &str = r#"
preset = "fig3-A"
command = "sde"
[model]
g = 2.0
[disentangle]
gamma_d = 0.5
[integrator]
dt = 0.001
t_end = 0.5
sample_every = 0.1
seed = 7
[sde]
n_traj = 40
keep_records = 2
"#;

fn run_cli(dir: &Path, config: &str, extra: &[&str]) -> std::process::Output {
    let cfg = dir.join("run.toml");
    fs::write(&cfg, config).unwrap();
    Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

#[test]
fn sweep_csv_header_and_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(tmp.path(), SMALL_SWEEP, &["--no-plots"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("out/sweep.csv")).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap();
    let mut golden = String::from("delta,omega1");
    for a in 0..4 {
        for b in 0..4 {
            golden.push_str(&format!(",B_{a}_{b}"));
        }
    }
    golden.push_str(",tau_ab,t_eff,error");
    assert_eq!(header, golden);
    assert_eq!(header.split(',').count(), sweep_header().len());
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 15);
    // omega1 varies fastest
    assert!(rows[0].starts_with("-1.0000000000000000e0,2.0000000000000001e-1,"));
    assert!(rows[1].starts_with("-1.0000000000000000e0,6.0000000000000009e-1,")
        || rows[1].starts_with("-1.0000000000000000e0,5.9999999999999998e-1,"));
    // B_0_0 is fixed by the trace
    let b00: f64 = rows[0].split(',').nth(2).unwrap().parse().unwrap();
    assert!((b00 - 1.0 / 2f64.sqrt()).abs() < 1e-12);
    assert!(!tmp.path().join("out/plots").exists());
}

#[test]
fn sweep_plots_written() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(tmp.path(), SMALL_SWEEP, &[]);
    assert!(out.status.success());
    let n = fs::read_dir(tmp.path().join("out/plots")).unwrap().count();
    assert_eq!(n, 18);
}

#[test]
fn ndjson_field_names() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(tmp.path(), SMALL_SDE, &["--no-plots"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(tmp.path().join("out/ensemble.ndjson")).unwrap();
    let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    let keys: Vec<&String> = first.as_object().unwrap().keys().collect();
    assert_eq!(keys, ["diagnostics", "k_a", "k_b", "measures", "t"]);
    let m: Vec<&String> = first["measures"].as_object().unwrap().keys().collect();
    assert_eq!(m, ["delta", "k_entropy", "l_entropy", "purity", "tau_ab"]);
    let d: Vec<&String> = first["diagnostics"].as_object().unwrap().keys().collect();
    assert_eq!(d, ["herm_err", "min_eig", "trace_err"]);
    assert_eq!(text.lines().count(), 6);
    assert!(tmp.path().join("out/trajectories/traj-0001.ndjson").exists());
    assert!(!tmp.path().join("out/trajectories/traj-0002.ndjson").exists());
}

#[test]
fn outputs_independent_of_thread_count() {
    let read = |threads: &str, config: &str, file: &str| {
        let tmp = tempfile::tempdir().unwrap();
        let out = run_cli(tmp.path(), config, &["--threads", threads, "--no-plots"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        fs::read(tmp.path().join("out").join(file)).unwrap()
    };
    assert_eq!(read("1", SMALL_SDE, "ensemble.ndjson"), read("4", SMALL_SDE, "ensemble.ndjson"));
    assert_eq!(
        read("1", SMALL_SDE, "trajectories/traj-0000.ndjson"),
        read("3", SMALL_SDE, "trajectories/traj-0000.ndjson")
    );
    assert_eq!(read("1", SMALL_SWEEP, "sweep.csv"), read("4", SMALL_SWEEP, "sweep.csv"));
}

#[test]
fn seed_changes_ensemble() {
    let tmp = tempfile::tempdir().unwrap();
    run_cli(tmp.path(), SMALL_SDE, &["--no-plots", "--seed", "1"]);
    let a = fs::read(tmp.path().join("out/ensemble.ndjson")).unwrap();
    run_cli(tmp.path(), SMALL_SDE, &["--no-plots", "--seed", "2"]);
    let b = fs::read(tmp.path().join("out/ensemble.ndjson")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn manifest_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(tmp.path(), SMALL_SDE, &["--no-plots", "--dt", "0.002"]);
    assert!(out.status.success());
    let dir = tmp.path().join("out");
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let from_manifest: RunConfig = serde_json::from_value(manifest["config"].clone()).unwrap();
    let from_toml = parse_config(&fs::read_to_string(dir.join("resolved.toml")).unwrap()).unwrap();
    assert_eq!(from_manifest, from_toml);
    assert_eq!(from_manifest.integrator.dt, 0.002);
    assert_eq!(from_manifest.sde.n_traj, 40);
    assert_eq!(manifest["seed"], 7);
    assert!(manifest.get("threads").is_none());
    let files: Vec<&str> = manifest["data_files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap())
        .collect();
    assert!(files.contains(&"ensemble.ndjson"));
    for f in files {
        assert!(dir.join(f).exists(), "{f}");
    }
}

#[test]
fn steady_and_measures_commands() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = SMALL_SWEEP.replace("command = \"sweep\"", "command = \"steady\"");
    assert!(run_cli(tmp.path(), &cfg, &[]).status.success());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/steady.json")).unwrap())
            .unwrap();
    assert!(v["measures"]["purity"].as_f64().unwrap() <= 1.0);
    let cfg = format!(
        "initial = \"steady-state-pure\"\n{}",
        SMALL_SWEEP.replace("command = \"sweep\"", "command = \"measures\"")
    );
    assert!(run_cli(tmp.path(), &cfg, &[]).status.success());
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("out/measures.json")).unwrap())
            .unwrap();
    assert!((v["measures"]["purity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert!(v["delta_pure"].is_number());
}

#[test]
fn exit_code_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_cli(tmp.path(), "command = \"sweep\"\n", &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("model.delta"), "{err}");

    let bad = SMALL_SWEEP.replace("gamma1 = 0.01", "gamma1 = -0.01");
    let out = run_cli(tmp.path(), &bad, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("damping.a.gamma1"));

    let out = Command::new(BIN).args(["--preset", "fig9"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_code_numerical_error() {
    let tmp = tempfile::tempdir().unwrap();
    let undamped = SMALL_SWEEP
        .replace("command = \"sweep\"", "command = \"steady\"")
        .replace("gamma1 = 0.01", "gamma1 = 0.0")
        .replace("gamma1 = 0.1", "gamma1 = 0.0")
        .replace("gamma_phi = 1e-6", "gamma_phi = 0.0")
        .replace("gamma_phi = 1e-5", "gamma_phi = 0.0");
    let out = run_cli(tmp.path(), &undamped, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_code_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = tmp.path().join("run.toml");
    fs::write(&cfg, SMALL_SWEEP).unwrap();
    let out = Command::new(BIN)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let out = Command::new(BIN)
        .arg("--config")
        .arg(tmp.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}
