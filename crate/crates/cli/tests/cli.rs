mod common;

use common::{fixture, run};
use serde_json::Value;
use std::path::Path;

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = run(&[
            "simulate", "--H", "0.08", "--lambda2", "0.1", "--T", "131072", "--L", "1024", "--delta", "1",
            "--subdivisions", "8", "--seed", "7", "--emit-price", "--out", s(out),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["measure.csv", "log_returns.csv", "realized.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let m = json(&a.join("manifest.json"));
    assert_eq!(m["seed"], 7);
    assert_eq!(m["args"]["subdivisions"], 8);
    assert_eq!(m["outputs"].as_array().unwrap().len(), 5);
}

#[test]
fn simulate_rejects_single_cell() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "simulate", "--H", "0.08", "--lambda2", "0.1", "--T", "100", "--L", "1", "--out",
        s(&dir.path().join("x")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("L / delta"));
}

#[test]
fn theory_bias_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("bias.csv");
    let o = run(&[
        "theory", "--curve", "bias", "--H", "0.002", "--delta", "1", "--tau-min", "10", "--tau-max", "500",
        "--out", s(&out),
    ]);
    assert!(o.status.success());
    let b = json(&dir.path().join("bias.json"));
    let slope = b["slope_b"].as_f64().unwrap();
    assert!((0.150..=0.170).contains(&slope), "{slope}");
    assert!(dir.path().join("bias.manifest.json").exists());
    let csv = std::fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().count(), 492);
}

#[test]
fn theory_gh_limit_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gh.csv");
    let o = run(&["theory", "--curve", "gh", "--H", "0", "--z", "1", "--out", s(&out)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let v: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - 4.0 * 2f64.ln()).abs() < 1e-12);
}

#[test]
fn estimate_simulated_series() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = run(&[
        "simulate", "--H", "0.1", "--lambda2", "0.05", "--T", "65536", "--L", "8192", "--subdivisions", "16",
        "--seed", "3", "--emit-price", "--out", s(&sim),
    ]);
    assert!(o.status.success());
    let fit = dir.path().join("fit.json");
    let o = run(&["estimate", "--input", s(&sim.join("realized.csv")), "--method", "gmm-lnm", "--out", s(&fit)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let f = json(&fit);
    assert_eq!(f["method"], "gmm_lnM");
    assert_eq!(f["seed"], 3);
    let h = f["H"].as_f64().unwrap();
    assert!((0.0..0.25).contains(&h), "{h}");
    let scaling = dir.path().join("scaling.json");
    let o = run(&["estimate", "--input", s(&sim.join("measure.csv")), "--method", "scaling", "--out", s(&scaling)]);
    assert!(o.status.success());
    assert!(json(&scaling)["h_hat"].as_f64().unwrap() > 0.0);
}

#[test]
fn estimate_short_series_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("short.csv");
    let mut text = String::from("index,value\n");
    for i in 0..100 {
        text.push_str(&format!("{i},{}\n", 1.0 + 0.1 * (i % 7) as f64));
    }
    std::fs::write(&input, text).unwrap();
    let o = run(&["estimate", "--input", s(&input), "--out", s(&dir.path().join("fit.json"))]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn estimate_reports_bad_line() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "index,value\n0,1.0\n1,abc\n").unwrap();
    let o = run(&["estimate", "--input", s(&input), "--out", s(&dir.path().join("fit.json"))]);
    assert_eq!(o.status.code(), Some(3));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.csv") && err.contains("line 3"), "{err}");
}

fn montecarlo(dir: &Path, name: &str, threads: &str, reps: &str) -> std::process::Output {
    run(&[
        "montecarlo", "--H", "0.1,0.2", "--lambda2", "0.05", "--reps", reps, "--L", "2048", "--T", "8192",
        "--subdivisions", "4", "--seed", "11", "--threads", threads, "--out", s(&dir.join(name)),
    ])
}

#[test]
fn montecarlo_is_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    assert!(montecarlo(dir.path(), "one.csv", "1", "4").status.success());
    assert!(montecarlo(dir.path(), "two.csv", "3", "4").status.success());
    let a = std::fs::read_to_string(dir.path().join("one.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("two.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 3);
}

#[test]
fn montecarlo_single_rep_marks_sd_absent() {
    let dir = tempfile::tempdir().unwrap();
    assert!(montecarlo(dir.path(), "single.csv", "1", "1").status.success());
    let text = std::fs::read_to_string(dir.path().join("single.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let sd = header.iter().position(|h| *h == "sd_H").unwrap();
    assert_eq!(row[sd], "NA");
}

#[test]
fn montecarlo_memory_guard() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "montecarlo", "--H", "0.1", "--lambda2", "0.05", "--L", "1048576", "--T", "4194304", "--subdivisions",
        "64", "--max-memory-mb", "64", "--out", s(&dir.path().join("x.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("MiB"));
}

#[test]
fn ingest_rejects_bad_rows_and_reports_them() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gk.csv");
    let o = run(&["ingest", "--ohlc", s(&fixture("ohlc_with_bad_rows.csv")), "--out", s(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 4"));
    let side = json(&dir.path().join("gk.json"));
    assert_eq!(side["kind"], "ingested");
    assert_eq!(side["rejected_rows"][0]["line"], 4);
    // the flat bar on line 6 has zero range and is dropped by the cleaning policy
    assert_eq!(side["dropped"].as_array().unwrap().len(), 1);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
}

#[test]
fn ingest_floor_keeps_every_day() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gk.csv");
    let o = run(&[
        "ingest", "--ohlc", s(&fixture("ohlc_with_bad_rows.csv")), "--cleaning", "floor", "--floor-epsilon", "1e-10",
        "--out", s(&out),
    ]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 5);
    assert!(text.contains("1e-10"));
}

#[test]
fn ingest_header_mismatch_names_column() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    std::fs::write(&input, "date,open,high,lo,close\n2020-01-02,1,1,1,1\n").unwrap();
    let o = run(&["ingest", "--ohlc", s(&input), "--out", s(&dir.path().join("x.csv"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("'lo'"));
}

#[test]
fn ingest_intraday_bipower() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("intraday.csv");
    std::fs::write(&input, "date,return\n2020-01-02,0.01\n2020-01-02,0.01\n2020-01-03,0.02\n2020-01-03,-0.02\n").unwrap();
    let out = dir.path().join("bv.csv");
    let o = run(&["ingest", "--intraday", s(&input), "--estimator", "bv", "--out", s(&out)]);
    assert!(o.status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let v: f64 = text.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((v - std::f64::consts::FRAC_PI_2 * 1e-4).abs() < 1e-18);
    let o = run(&["ingest", "--intraday", s(&input), "--estimator", "gk", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bundled_fixture_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let series = dir.path().join("gk.csv");
    let o = run(&["ingest", "--ohlc", s(&fixture("synthetic_ohlc.csv")), "--out", s(&series)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit = dir.path().join("fit.json");
    let o = run(&["estimate", "--input", s(&series), "--out", s(&fit)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let h = json(&fit)["H"].as_f64().unwrap();
    assert!((0.0..0.3).contains(&h), "{h}");
}
