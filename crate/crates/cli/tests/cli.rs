use std::path::Path;
use std::process::{Command, Output};

use holeflow::solver::{read_snapshot, Snapshot};

fn holeflow(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holeflow"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HOLEFLOW_OUT_DIR")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SOLVE: &str = r#"
seed = 7
[grid]
L = 0.5
n = 32
[hole]
eps = 0.06
[phys]
mu = 0.01
gamma = 3
[ic]
kind = "bump"
amplitude = 0.2
sigma = 0.1
[time]
T = 0.02
checkpoints = 4
"#;

const SWEEP: &str = r#"
[grid]
L = 0.5
n = 32
[sweep]
eps_list = [0.1, 0.05]
[phys]
mu = 0.01
gamma = 3
[ic]
kind = "bump"
amplitude = 0.2
sigma = 0.1
[time]
T = 0.02
checkpoints = 4
"#;

#[test]
fn cutoff_norms_writes_csv_and_schema() {
    let dir = tempfile::tempdir().unwrap();
    let o = holeflow(&["cutoff-norms", "--eps", "0.01,0.001", "--q", "1.5,2,3", "--check"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("cutoff_norms.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "eps,alpha,q,numeric,closed_form,rel_err");
    assert_eq!(lines.count(), 6);
    assert!(dir.path().join("cutoff_norms.schema.json").exists());
    assert!(stdout(&o).contains("PASS"));
}

#[test]
fn testfn_rates_rejects_unknown_field() {
    let dir = tempfile::tempdir().unwrap();
    let o = holeflow(&["testfn-rates", "--phi", "cubic", "--p", "1.5", "--q", "4", "--eps-list", "0.04,0.02"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = holeflow(
        &["testfn-rates", "--phi", "sine", "--p", "1.5", "--q", "4", "--eps-list", "0.04,0.02,0.01", "--check"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("rates.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn bogovskii_check_small() {
    let dir = tempfile::tempdir().unwrap();
    let o = holeflow(
        &["bogovskii-check", "--eps-list", "0.16,0.08", "--p", "1.5", "--q", "3", "--n", "64"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("residuals.json")).unwrap()).unwrap();
    assert_eq!(json["solves"].as_array().unwrap().len(), 2);
    assert!(dir.path().join("uniformity.csv").exists());
}

#[test]
fn solve_is_deterministic_and_snapshots_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, SOLVE).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = holeflow(&["solve", "--config", cfg.to_str().unwrap(), "--check"], out);
        assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), String::from_utf8_lossy(&o.stderr));
    }
    for name in ["monitors.csv", "run.json", "snapshot_0004.bin"] {
        assert_eq!(std::fs::read(a.join(name)).unwrap(), std::fs::read(b.join(name)).unwrap(), "{name}");
    }
    let snap = read_snapshot(&a.join("snapshot_0004.bin")).unwrap();
    assert_eq!(snap.n, 32);
    assert_eq!(snap.eps, 0.06);
    assert!((snap.t - 0.02).abs() < 1e-15);
    assert_eq!(std::fs::metadata(a.join("snapshot_0000.bin")).unwrap().len() as usize, Snapshot::byte_len(32));
    let monitors = std::fs::read_to_string(a.join("monitors.csv")).unwrap();
    assert_eq!(monitors.lines().count(), 6);
}

#[test]
fn config_errors_exit_2_and_list_everything() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, SOLVE.replace("mu = 0.01", "mu = -0.01").replace("eps = 0.06", "eps = 0.3")).unwrap();
    let o = holeflow(&["solve", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("phys.mu") && err.contains("hole.eps"), "{err}");

    std::fs::write(&cfg, SWEEP.replace("gamma = 3", "gamma = 1.5")).unwrap();
    let o = holeflow(&["homogenize", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma > 2"));
}

#[test]
fn env_var_sets_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("from_env");
    let o = Command::new(env!("CARGO_BIN_EXE_holeflow"))
        .args(["cutoff-norms", "--eps", "0.01", "--q", "2"])
        .env("HOLEFLOW_OUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(target.join("cutoff_norms.csv").exists());
}

#[test]
fn homogenize_small_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    std::fs::write(&cfg, SWEEP).unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = holeflow(&["homogenize", "--config", cfg.to_str().unwrap()], out);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let json = std::fs::read_to_string(a.join("sweep.json")).unwrap();
    assert_eq!(json, std::fs::read_to_string(b.join("sweep.json")).unwrap());
    let report: holeflow::experiment::SweepReport = serde_json::from_str(&json).unwrap();
    assert_eq!(serde_json::to_string_pretty(&report).unwrap() + "\n", json);
    assert_eq!(report.rows.len(), 3);
    let series = std::fs::read_to_string(a.join("series_velocity_l2l2.csv")).unwrap();
    assert_eq!(series.lines().next().unwrap(), "x,y");
    assert_eq!(series.lines().count(), 3);
    for f in ["metric_density_weak.csv", "metric_pressure_term_adhoc.csv", "monitors_row0.csv", "timing.json"] {
        assert!(a.join(f).exists(), "{f}");
    }
}

#[test]
fn shipped_configs_parse() {
    use holeflow_cli::config::{parse_config, Command};
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let run = parse_config(&root.join("run.toml")).unwrap();
    assert!(matches!(run.command, Command::Solve(_)));
    let sweep = parse_config(&root.join("sweep.toml")).unwrap();
    let Command::Homogenize(s) = sweep.command else { panic!("expected a sweep") };
    assert_eq!(s, holeflow::experiment::SweepConfig::standard());
}
