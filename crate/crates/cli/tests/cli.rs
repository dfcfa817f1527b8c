//! End-to-end checks of the `aoi-sched` binary: flag handling, exit codes,
//! file layout, and byte-for-byte reproducibility.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aoi-sched"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_value(output: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&output.stdout);
    let line = text
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no `{key}` line in: {text}"));
    line.split('=').nth(1).unwrap().trim().parse().unwrap()
}

fn tempdir(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("aoi-sched-cli-{name}-{}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn simulate_deterministic_examples() {
    let dir = tempdir("simulate");
    let out = run(&[
        "simulate",
        "--policy",
        "long-wait:2",
        "--t",
        "det:2",
        "--c",
        "det:1",
        "--n",
        "10000",
        "--seed",
        "1",
        "--trace",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let avg = stdout_value(&out, "avg_aoi_trapezoid");
    assert!((avg - 4.5).abs() < 3e-4, "long-wait avg {avg}");
    assert!(dir.join("result.json").is_file());
    assert!(dir.join("manifest.json").is_file());
    let trace = fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("k,t,T,a,c,C,d,W,D,Q,A\r\n"));

    let result: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("result.json")).unwrap()).unwrap();
    assert_eq!(result["n"], 10000);

    let out = run(&[
        "simulate",
        "--policy",
        "zero-wait",
        "--t",
        "det:2",
        "--c",
        "det:1",
        "--n",
        "10000",
        "--seed",
        "1",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let avg = stdout_value(&out, "avg_aoi_trapezoid");
    assert!((avg - 4.0).abs() < 3e-4, "zero-wait avg {avg}");
}

#[test]
fn usage_errors_exit_2() {
    let cases: &[&[&str]] = &[
        &[
            "simulate",
            "--policy",
            "zero-wait",
            "--t",
            "det:2",
            "--c",
            "det:1",
            "--n",
            "0",
        ],
        &[
            "simulate", "--policy", "warp", "--t", "det:2", "--c", "det:1", "--n", "5",
        ],
        &[
            "simulate",
            "--policy",
            "zero-wait",
            "--t",
            "gaussian:1",
            "--c",
            "det:1",
            "--n",
            "5",
        ],
        &[
            "sweep",
            "--policies",
            "paoi-t",
            "--t",
            "exp:0.8",
            "--c",
            "exp:0.2",
            "--interval",
            "4:1",
            "--step",
            "0.5",
            "--n",
            "100",
        ],
        &["ratio-sweep", "--ratios", "0,-1", "--n", "100"],
        &["sweep", "--scenario", "fig9", "--n", "100"],
    ];
    for args in cases {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {:?}", out.status);
        assert!(!out.stderr.is_empty(), "{args:?} should print a diagnostic");
    }
    // n = 0 names the constraint
    let out = run(&[
        "simulate",
        "--policy",
        "zero-wait",
        "--t",
        "det:2",
        "--c",
        "det:1",
        "--n",
        "0",
    ]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("n must be >= 1"));
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempdir("runtime-errors");
    // Zero-mean transmission law is a model violation, not a flag error.
    let out = run(&[
        "simulate",
        "--policy",
        "zero-wait",
        "--t",
        "det:0",
        "--c",
        "det:1",
        "--n",
        "10",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&["calibrate-beta", "--t", "det:0", "--c", "det:0"]);
    assert_eq!(out.status.code(), Some(1), "degenerate distributions");
}

#[test]
fn sweep_writes_matching_curves_per_regime() {
    // Transmission-dominant: the postponed plan never binds, so the
    // paoi-t and paoi-tp files are identical.
    let dir = tempdir("sweep-fig3");
    let out = run(&[
        "sweep",
        "--policies",
        "paoi-t,paoi-tp,long-wait",
        "--t",
        "exp:0.8",
        "--c",
        "exp:0.2",
        "--interval",
        "1:4",
        "--step",
        "0.25",
        "--n",
        "2000",
        "--seed",
        "7",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let paoi_t = fs::read(dir.join("sweep_paoi-t.csv")).unwrap();
    let paoi_tp = fs::read(dir.join("sweep_paoi-tp.csv")).unwrap();
    let long_wait = fs::read(dir.join("sweep_long-wait.csv")).unwrap();
    assert_eq!(paoi_t, paoi_tp);
    assert_ne!(paoi_t, long_wait);
    assert!(dir.join("sweep_paoi-t_summary.json").is_file());
    assert!(dir.join("manifest.json").is_file());

    // Processing-dominant: paoi-tp degrades to the long-wait policy.
    let dir = tempdir("sweep-fig4");
    let out = run(&[
        "sweep",
        "--policies",
        "paoi-tp,long-wait",
        "--t",
        "exp:0.2",
        "--c",
        "exp:0.8",
        "--interval",
        "1:4",
        "--step",
        "0.25",
        "--n",
        "2000",
        "--seed",
        "7",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let paoi_tp = fs::read(dir.join("sweep_paoi-tp.csv")).unwrap();
    let long_wait = fs::read(dir.join("sweep_long-wait.csv")).unwrap();
    assert_eq!(paoi_tp, long_wait);
}

#[test]
fn scenario_shortcuts_expand() {
    let dir = tempdir("scenario");
    let out = run(&[
        "sweep",
        "--scenario",
        "fig3",
        "--n",
        "400",
        "--step",
        "0.5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    for file in [
        "sweep_paoi-t.csv",
        "sweep_paoi-tp.csv",
        "sweep_long-wait.csv",
    ] {
        assert!(dir.join(file).is_file(), "{file} missing");
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["dist_t"], "exp:0.8");
    assert_eq!(manifest["config"]["interval"][1], 4.0);

    let dir = tempdir("scenario-fig7");
    let out = run(&[
        "ratio-sweep",
        "--scenario",
        "fig7",
        "--ratios",
        "4",
        "--policies",
        "paoi-tp",
        "--n",
        "300",
        "--step",
        "0.5",
        "--out",
        dir.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(dir.join("ratio_sweep.csv")).unwrap();
    let lines: Vec<&str> = csv.split("\r\n").filter(|l| !l.is_empty()).collect();
    assert_eq!(lines[0], "ratio,policy,best_param,best_aoi");
    assert_eq!(lines.len(), 2, "one row per (ratio, policy)");
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let path = e.unwrap().path();
            (
                path.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&path).unwrap(),
            )
        })
        .collect();
    entries.sort();
    entries
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempdir("rerun");
    let args = [
        "simulate",
        "--policy",
        "paoi-tp:2.4",
        "--t",
        "exp:0.8",
        "--c",
        "uniform:0,0.4",
        "--n",
        "500",
        "--seed",
        "42",
        "--trace",
        "--out",
        dir.to_str().unwrap(),
    ];
    assert!(run(&args).status.success());
    let first = dir_bytes(&dir);

    // Re-run the argv recorded in the manifest.
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    let argv: Vec<String> = manifest["argv"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    let replay: Vec<&str> = argv[1..].iter().map(String::as_str).collect();
    assert!(run(&replay).status.success());
    let second = dir_bytes(&dir);
    assert_eq!(
        first, second,
        "re-execution from the manifest must reproduce outputs"
    );
}

#[test]
fn calibrate_beta_prints_solution() {
    let out = run(&[
        "calibrate-beta",
        "--t",
        "det:2",
        "--c",
        "det:1",
        "--mc",
        "10000",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let solution: serde_json::Value = serde_json::from_slice(&out.stdout).expect("stdout is JSON");
    let beta = solution["beta"].as_f64().unwrap();
    assert!((beta - 2.0).abs() < 1e-6, "beta {beta}");
    assert_eq!(solution["mc_samples"], 10000);
}

#[test]
fn thread_cap_env_is_honored_and_validated() {
    let dir = tempdir("threads");
    let out = Command::new(env!("CARGO_BIN_EXE_aoi-sched"))
        .env("AOI_SCHED_THREADS", "1")
        .args([
            "sweep",
            "--policies",
            "long-wait",
            "--t",
            "exp:0.8",
            "--c",
            "exp:0.2",
            "--interval",
            "1:2",
            "--step",
            "0.5",
            "--n",
            "200",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let out = Command::new(env!("CARGO_BIN_EXE_aoi-sched"))
        .env("AOI_SCHED_THREADS", "zero")
        .args([
            "sweep",
            "--policies",
            "long-wait",
            "--t",
            "exp:0.8",
            "--c",
            "exp:0.2",
            "--interval",
            "1:2",
            "--step",
            "0.5",
            "--n",
            "200",
            "--out",
            dir.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
