use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stefan-lab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn read(p: &Path) -> String {
    std::fs::read_to_string(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn table_lambda(table: &str, b: f64, k: usize) -> f64 {
    table
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|f| f[0].parse::<f64>().unwrap() == b && f[1] == k.to_string())
        .map(|f| f[2].parse().unwrap())
        .expect("row present")
}

#[test]
fn spectrum_writes_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = lab(&[
        "--mode", "spectrum", "--grid", "512", "--b", "0.01", "--out", out,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let table = read(&dir.path().join("eigen_table.csv"));
    let l0 = table_lambda(&table, 0.0, 1);
    let lb = table_lambda(&table, 0.01, 1);
    assert!((l0 - 5.783186).abs() < 1e-4);
    assert!((lb - (l0 - 0.01)).abs() < 1e-3);
    let report: serde_json::Value =
        serde_json::from_str(&read(&dir.path().join("spectrum_report.json"))).unwrap();
    assert!(report.is_object());
}

#[test]
fn configuration_errors_exit_with_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "k = 1\ngrid = = 3\n").unwrap();
    let o = lab(&["--config", bad.to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));
    let o = lab(&["--mode", "shoot", "--k", "4"]);
    assert_eq!(code(&o), 1);
    let o = lab(&["--grid", "1000", "--b0", "0.2"]);
    assert_eq!(code(&o), 1);
    let o = lab(&["--mode", "run", "--k", "2", "--grid", "256"]);
    assert_eq!(code(&o), 1, "k = 2 without lower-mode data");
}

#[test]
fn run_k1_both_regimes() {
    let dir = tempfile::tempdir().unwrap();
    for (b, regime) in [("-0.01", "freezing"), ("0.01", "melting")] {
        let out = dir.path().join(regime);
        let o = lab(&[
            "--mode",
            "run",
            "--k",
            "1",
            "--b0",
            b,
            "--grid",
            "256",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(
            code(&o),
            0,
            "{}{}",
            String::from_utf8_lossy(&o.stdout),
            String::from_utf8_lossy(&o.stderr)
        );
        let v: serde_json::Value =
            serde_json::from_str(&read(&out.join("run_k1_verdict.json"))).unwrap();
        assert_eq!(v["regime_observed"], regime);
        assert_eq!(v["passed"], true);
        assert!(read(&out.join("run_k1_timeseries.csv")).starts_with("s,t,lambda,a,mass,l2b_norm"));
        assert!(read(&out.join("run_k1_modulation.csv")).starts_with("s,b,b_1,E"));
        assert!(read(&out.join("run_k1_decay.svg")).contains("<svg"));
    }
}

#[test]
fn short_horizon_is_a_verification_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "--mode",
        "run",
        "--grid",
        "256",
        "--smax",
        "0.2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("decades"));
}

#[test]
fn shoot_is_deterministic_and_feeds_run() {
    let dir = tempfile::tempdir().unwrap();
    let json = |d: &str| {
        let out = dir.path().join(d);
        let o = lab(&[
            "--mode",
            "shoot",
            "--k",
            "2",
            "--grid",
            "256",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        (out.join("shoot_k2.json"), read(&out.join("shoot_k2.json")))
    };
    let (path, first) = json("a");
    let (_, second) = json("b");
    assert_eq!(first, second);
    let v: serde_json::Value = serde_json::from_str(&first).unwrap();
    let b1 = v["found_initials"][0].as_f64().unwrap();
    assert!(b1.abs() < 0.03);
    assert!(v["exit_s"].is_null());
    assert!(v["max_V2"].as_f64().unwrap() <= 1.0);

    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("run");
    std::fs::write(
        &cfg,
        format!(
            "mode = \"run\"\nk = 2\ngrid = 256\nout = {:?}\nshoot_result = {:?}\n[tolerances]\nmass = 2e-5\n",
            out.to_str().unwrap(),
            path.to_str().unwrap()
        ),
    )
    .unwrap();
    let o = lab(&["--config", cfg.to_str().unwrap()]);
    let v: serde_json::Value =
        serde_json::from_str(&read(&out.join("run_k2_verdict.json"))).unwrap();
    assert_eq!(v["regime_observed"], "freezing");
    assert_eq!(code(&o), if v["passed"] == true { 0 } else { 2 });
}

#[test]
fn quick_verification_prints_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = lab(&[
        "--mode",
        "verify-all",
        "--quick",
        "--json",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let criteria = summary["criteria"].as_array().unwrap();
    assert!(criteria
        .iter()
        .all(|c| c["id"].as_u64().unwrap() <= 4 || c["id"].as_u64().unwrap() == 11));
    let all = criteria.iter().all(|c| c["passed"] == true);
    assert_eq!(code(&o), if all { 0 } else { 2 });
    assert!(dir.path().join("verify_summary.json").exists());
}
