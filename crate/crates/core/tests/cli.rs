//! End-to-end checks of the command-line interface: config parsing, output
//! shapes, manifest reruns, and exit codes.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_stosync"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

const SYNC_CONFIG: &str = r#"
[field]
kind = "double_well"
dim = 2

[noise]
seed = 2024
delta = 0.001
sigma = 1.0

[run]
t1 = 100.0

[sync]
x = [1.0, 0.0]
y = [-1.0, 0.0]
n_seeds = 200
epsilon = 0.05
checkpoints = [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0]
"#;

#[test]
fn sync_end_to_end_header_and_median_decline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sync.toml", SYNC_CONFIG);
    let out = dir.path().join("out");
    let status = bin()
        .args(["sync", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let csv = fs::read_to_string(out.join("sync_timeseries.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "t,q05,q25,q50,q75,q95,exceed_prob");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 11);
    // Median declines monotonically after t = 10 (tiny floor slack: once
    // members coincide bitwise the distance sticks at exactly zero).
    let q50: Vec<f64> = rows.iter().map(|r| r[3]).collect();
    for w in q50[1..].windows(2) {
        assert!(w[1] <= w[0] * 1.05 + 1e-12, "q50 not declining: {q50:?}");
    }
    assert!(q50[10] < 0.01, "median at T=100: {}", q50[10]);

    // Manifest digests match emitted files.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "sync");
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 2);
}

#[test]
fn manifest_rerun_reproduces_digests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "mini.toml",
        r#"
[field]
kind = "ou"
dim = 2

[noise]
seed = 7
delta = 0.01

[run]
t1 = 2.0

[sync]
x = [1.0, 0.0]
y = [0.0, 1.0]
n_seeds = 30
epsilon = 0.05
checkpoints = [0.0, 1.0, 2.0]
"#,
    );
    let out1 = dir.path().join("o1");
    let out2 = dir.path().join("o2");
    assert!(bin()
        .args(["sync", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out1)
        .args(["--workers", "1"])
        .status()
        .unwrap()
        .success());
    // Re-run from the manifest with a different worker count.
    assert!(bin()
        .args(["sync", "--config"])
        .arg(out1.join("manifest.json"))
        .arg("--out")
        .arg(&out2)
        .args(["--workers", "4"])
        .status()
        .unwrap()
        .success());
    let m1: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out1.join("manifest.json")).unwrap()).unwrap();
    let m2: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out2.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m1["outputs"], m2["outputs"]);
    assert_eq!(m1["config_hash"], m2["config_hash"]);
}

#[test]
fn config_error_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[field]\nkind = \"nope\"\n");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    // Plain EM on the double well at a coarse step explodes; the lyapunov
    // command propagates it as a numerical failure.
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "explode.toml",
        r#"
[field]
kind = "double_well"
dim = 1

[noise]
seed = 3
delta = 0.5

[integrator]
scheme = "euler_maruyama"

[run]
t1 = 50.0
x0 = [[3.0]]
seeds = 1

[lyapunov]
k = 1
"#,
    );
    let status = bin()
        .args(["lyapunov", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn gibbs_lyapunov_check_control_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "multi.toml",
        r#"
[field]
kind = "double_well"
dim = 1

[noise]
seed = 11
delta = 0.001
sigma = 1.0

[run]
t1 = 60.0
x0 = [[1.0]]
seeds = 2

[lyapunov]
k = 1
burn_in = 6.0
twopoint = true

[gibbs]
ball_radii = [1.0, 2.0]
sigmas = [2.0]

[check]
kind = "one_sided_lipschitz"
box = [-3.0, 3.0]
n_pairs = 20000

[control]
mode = "contraction"
z = [4.0]
radius = 1.0
"#,
    );
    let out = dir.path().join("out");
    for sub in ["lyapunov", "gibbs", "check", "control"] {
        let status = bin()
            .args([sub, "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "{sub} failed");
    }
    let ly: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("lyapunov.json")).unwrap()).unwrap();
    let top = ly["exponents"][0].as_f64().unwrap();
    assert!(top < 0.0, "double-well top exponent {top}");
    assert!(ly["twopoint_top"].as_f64().unwrap() < 0.0);
    assert!(out.join("lyapunov_running.csv").exists());

    let gibbs: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("gibbs.json")).unwrap()).unwrap();
    assert!(gibbs["z"].as_f64().unwrap() > 0.0);
    assert_eq!(gibbs["ball_mass"].as_array().unwrap().len(), 4);

    let check: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("check_report.json")).unwrap()).unwrap();
    assert_eq!(check["verdict"], "satisfied_empirically");

    let control: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("control_report.json")).unwrap())
            .unwrap();
    assert_eq!(control["passed"], true);
}

#[test]
fn seed_override_changes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sim.toml",
        r#"
[field]
kind = "ou"
dim = 1

[noise]
seed = 5
delta = 0.01

[run]
t1 = 1.0
x0 = [[1.0]]
seeds = 1
"#,
    );
    let (o1, o2, o3) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    for (out, seed) in [(&o1, None), (&o2, Some("5")), (&o3, Some("6"))] {
        let mut c = bin();
        c.args(["simulate", "--config"]).arg(&cfg).arg("--out").arg(out);
        if let Some(s) = seed {
            c.args(["--seed", s]);
        }
        assert!(c.status().unwrap().success());
    }
    let read = |p: &Path| fs::read_to_string(p.join("trajectory_s0_m0.csv")).unwrap();
    assert_eq!(read(&o1), read(&o2));
    assert_ne!(read(&o1), read(&o3));
}
