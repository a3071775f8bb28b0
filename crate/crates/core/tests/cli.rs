use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use halfflow::flow::LEDGER_HEADER;
use halfflow::io::parse_ledger_csv;

const SMALL: &str = r#"
[grid]
nx = 33
ny = 17
lx = 3.0
ly = 3.0
grading = 1.0

[penalty]
s = 0.5
epsilon = 0.3
epsilon_list = [0.4, 0.3, 0.2]

[scheme]
kind = "explicit"
t_final = 0.8

[initial]
kind = "bump"
amplitude = 1.0
width = 0.7

[diagnostics]
t0 = [0.5]
radii = [0.05, 0.1, 0.2, 0.3]
local_radius = 0.1
scan_times = [0.5]
scan_radius = 0.2

[output]
snapshot_stride = 2
"#;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfflow")).args(args).current_dir(dir).output().expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn constant_data_gives_zero_energy_ledger() {
    let dir = setup(
        r#"
[grid]
nx = 17
ny = 9
grading = 1.0
[scheme]
t_final = 0.1
[initial]
kind = "constant"
value = [0.6, 0.8]
"#,
    );
    let o = run(dir.path(), &["flow", "--config", "run.toml", "--out", "o"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("o/ledger.csv")).unwrap();
    assert_eq!(text.lines().next(), Some(LEDGER_HEADER));
    let rows = parse_ledger_csv(&text).unwrap();
    assert!(rows.len() > 1);
    for r in rows {
        assert!(r.dirichlet.abs() < 1e-20 && r.potential.abs() < 1e-20 && r.dissipation_increment.abs() < 1e-20);
    }
    assert!(dir.path().join("o/manifest.json").exists());
    assert!(dir.path().join("o/resolved_config").exists());
    assert!(dir.path().join("o/snapshots/snap_00000.hflw").exists());
}

#[test]
fn out_of_range_order_is_a_config_error() {
    let dir = setup(SMALL);
    let o = run(dir.path(), &["flow", "--config", "run.toml", "--out", "o", "--set", "penalty.s=1.5"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("penalty.s"));
}

#[test]
fn increasing_epsilon_list_is_a_config_error() {
    let dir = setup(SMALL);
    let o = run(dir.path(), &["eps-sweep", "--config", "run.toml", "--out", "o", "--set", "penalty.epsilon_list=[0.1, 0.2]"]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilon_list"));
}

#[test]
fn unknown_keys_are_config_errors() {
    let dir = setup(&format!("{SMALL}\n[extra]\nfoo = 1\n"));
    let o = run(dir.path(), &["extend", "--config", "run.toml", "--out", "o"]);
    assert_eq!(code(&o), 3);
}

#[test]
fn usage_errors_exit_two() {
    let dir = setup(SMALL);
    assert_eq!(code(&run(dir.path(), &["bogus"])), 2);
    assert_eq!(code(&run(dir.path(), &["flow", "--config", "run.toml", "--frobnicate"])), 2);
    assert_eq!(code(&run(dir.path(), &["flow"])), 2);
    assert_eq!(code(&run(dir.path(), &["--help"])), 0);
}

#[test]
fn flow_output_is_deterministic() {
    let dir = setup(SMALL);
    for out in ["a", "b"] {
        let o = run(dir.path(), &["flow", "--config", "run.toml", "--out", out]);
        assert_eq!(code(&o), 0);
    }
    let a = fs::read(dir.path().join("a/manifest.json")).unwrap();
    let b = fs::read(dir.path().join("b/manifest.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(fs::read(dir.path().join("a/ledger.csv")).unwrap(), fs::read(dir.path().join("b/ledger.csv")).unwrap());
}

#[test]
fn monotonicity_reads_a_stored_trajectory() {
    let dir = setup(SMALL);
    assert_eq!(code(&run(dir.path(), &["flow", "--config", "run.toml", "--out", "traj"])), 0);
    let o = run(
        dir.path(),
        &["monotonicity", "--config", "run.toml", "--out", "mono", "--set", "diagnostics.trajectory=\"traj\""],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(dir.path().join("mono/monotonicity.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t0,x0,R,D,E"));
    let mut groups: Vec<Vec<f64>> = Vec::new();
    let mut key = String::new();
    for l in lines {
        let cols: Vec<&str> = l.split(',').collect();
        let k = format!("{},{}", cols[0], cols[1]);
        if k != key {
            groups.push(Vec::new());
            key = k;
        }
        groups.last_mut().unwrap().push(cols[4].parse().unwrap());
    }
    assert_eq!(groups.len(), 3);
    for g in groups {
        assert!(g.windows(2).all(|w| w[0] <= 1.05 * w[1]), "{g:?}");
    }
}

#[test]
fn missing_trajectory_is_a_solver_error() {
    let dir = setup(SMALL);
    let o = run(
        dir.path(),
        &["local-energy", "--config", "run.toml", "--out", "o", "--set", "diagnostics.trajectory=\"nowhere\""],
    );
    assert_eq!(code(&o), 4);
    let err: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/error.json")).unwrap()).unwrap();
    assert_eq!(err["command"], "local-energy");
}

#[test]
fn reduced_green_verification_passes() {
    let dir = setup(SMALL);
    let o = run(
        dir.path(),
        &[
            "green-verify",
            "--config",
            "run.toml",
            "--out",
            "o",
            "--set",
            "green.samples=8",
            "--set",
            "green.skip_ladder=true",
        ],
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("o/verification.json")).unwrap()).unwrap();
    assert!(v["checks"].as_array().unwrap().iter().all(|c| c["pass"] == true));
}

#[test]
fn remaining_subcommands_run() {
    let dir = setup(SMALL);
    for (cmd, file) in [
        ("extend", "extension.hflw"),
        ("fracop", "fracop.csv"),
        ("local-energy", "local_energy.csv"),
        ("singular-scan", "scan.csv"),
        ("eps-sweep", "eps_sweep.csv"),
    ] {
        let o = run(dir.path(), &[cmd, "--config", "run.toml", "--out", cmd]);
        assert_eq!(code(&o), 0, "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        assert!(dir.path().join(cmd).join(file).exists(), "{cmd}");
        let manifest: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join(cmd).join("manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["command"], cmd);
    }
}
