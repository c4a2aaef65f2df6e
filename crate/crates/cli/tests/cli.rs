//! End-to-end runs of the `snspd-lab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_snspd-lab"));
    c.env_remove("SNSPD_LAB_SEED");
    c
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn sha(path: &Path) -> Vec<u8> {
    Sha256::digest(std::fs::read(path).unwrap()).to_vec()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect()
}

const SMALL: &str = "channel_count = 4\nseed = 5\ni_set = 1.0\n[detector]\neta_internal = 0.45\ni_width = 0.03\ndcr_slope = 50.0\n";

#[test]
fn simulate_smoke_and_repeatability() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let cfg = repo("configs/default.toml");
    for out in [&a, &b] {
        ok(&["simulate", s(&cfg), "--duration", "0.02", "--out", s(out)]);
    }
    let report = std::fs::read_to_string(a.join("sim_report.csv")).unwrap();
    assert_eq!(csv_rows(&report).len(), 64);
    for f in ["timetags.sntt", "sim_report.csv", "config.toml"] {
        assert_eq!(sha(&a.join(f)), sha(&b.join(f)), "{f}");
    }
    assert!(a.join("manifest.json").exists());
}

#[test]
fn zero_duration_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["simulate", s(&repo("configs/default.toml")), "--duration", "0", "--out", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("duration"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn replay_reproduces_outputs() {
    let tmp = TempDir::new().unwrap();
    let first = tmp.path().join("first");
    ok(&["simulate", "--config", s(&repo("configs/default.toml")), "--duration", "0.01", "--seed", "77", "--out", s(&first)]);
    let again = tmp.path().join("again");
    ok(&["replay", s(&first.join("manifest.json")), "--out", s(&again)]);
    assert_eq!(sha(&first.join("timetags.sntt")), sha(&again.join("timetags.sntt")));
    assert_eq!(sha(&first.join("sim_report.csv")), sha(&again.join("sim_report.csv")));
}

#[test]
fn environment_seed_overrides_flag() {
    let tmp = TempDir::new().unwrap();
    let (env, flag) = (tmp.path().join("env"), tmp.path().join("flag"));
    let cfg = repo("configs/default.toml");
    let st = bin()
        .args(["simulate", s(&cfg), "--duration", "0.005", "--seed", "1", "--out", s(&env)])
        .env("SNSPD_LAB_SEED", "9")
        .status()
        .unwrap();
    assert!(st.success());
    ok(&["simulate", s(&cfg), "--duration", "0.005", "--seed", "9", "--out", s(&flag)]);
    assert_eq!(sha(&env.join("timetags.sntt")), sha(&flag.join("timetags.sntt")));
    let manifest = std::fs::read_to_string(env.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 9"));
}

#[test]
fn sde_batch_plateau_in_range() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let batch = tmp.path().join("batch");
    ok(&["simulate", s(&cfg), "--duration", "0.02", "--dark-duration", "0.5", "--bias-sweep", "0.7:1.04:0.02", "--out", s(&batch)]);
    let csv = ok(&["analyze", "sde", s(&batch)]);
    for ch in 0..4 {
        // plateau: the sample nearest normalized bias 1
        let plateau = csv_rows(&csv)
            .into_iter()
            .filter(|r| r[0] == ch.to_string())
            .min_by(|a, b| {
                let d = |r: &Vec<String>| (r[2].parse::<f64>().unwrap() - 1.0).abs();
                d(a).total_cmp(&d(b))
            })
            .unwrap();
        let sde: f64 = plateau[5].parse().unwrap();
        assert!((0.3..=0.6).contains(&sde), "channel {ch}: {sde}");
    }
}

#[test]
fn interarrival_histogram_empty_below_dead_time() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("small.toml");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = tmp.path().join("run");
    ok(&["simulate", s(&cfg), "--duration", "0.2", "--out", s(&out)]);
    let csv = ok(&["analyze", "iat", s(&out.join("timetags.sntt")), "--channel", "2", "--bin-ps", "1000", "--max-lag-ps", "100000"]);
    let rows = csv_rows(&csv);
    let total: u64 = rows.iter().map(|r| r[1].parse::<u64>().unwrap()).sum();
    assert!(total > 1000);
    for r in rows.iter().filter(|r| r[0].parse::<u64>().unwrap() < 10_000) {
        assert_eq!(r[1], "0", "bin {}", r[0]);
    }
    let bad = run(&["analyze", "iat", s(&out.join("timetags.sntt")), "--channel", "9"]);
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn crosstalk_near_minus_sixty_db() {
    let csv = ok(&["analyze", "crosstalk", s(&repo("configs/default.toml")), "--victims", "1,9,30"]);
    for r in csv_rows(&csv) {
        let db: f64 = r[5].parse().unwrap();
        assert!((db + 60.0).abs() < 2.0, "victim {}: {db} dB", r[0]);
    }
}

#[test]
fn pulsed_jitter_near_packaged_value() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("pulsed");
    ok(&["simulate", s(&repo("configs/pulsed.toml")), "--duration", "0.1", "--out", s(&out)]);
    let csv = ok(&["analyze", "jitter", s(&out.join("timetags.sntt")), "--sync-period-ps", "1000000", "--channel", "0,1,2"]);
    for r in csv_rows(&csv) {
        let fwhm: f64 = r[3].parse().unwrap();
        assert!((fwhm - 110.0).abs() < 20.0, "channel {}: {fwhm} ps", r[0]);
    }
}

#[test]
fn plan_bundled_survey() {
    let tmp = TempDir::new().unwrap();
    let survey = repo("data/survey_176.csv");
    let out = tmp.path().join("plan");
    ok(&["plan", s(&survey), "--k", "64", "--grid", "8x8", "--out", s(&out)]);
    let rows = csv_rows(&std::fs::read_to_string(out.join("assignment.csv")).unwrap());
    assert_eq!(rows.len(), 64);
    let ports: std::collections::HashSet<(String, String)> = rows.iter().map(|r| (r[3].clone(), r[4].clone())).collect();
    assert_eq!(ports.len(), 64);

    let infeasible = run(&["plan", s(&survey), "--k", "200", "--grid", "8x8", "--out", s(&tmp.path().join("x"))]);
    assert_eq!(infeasible.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&infeasible.stderr).contains("eligible"));

    let summary = ok(&["plan", s(&survey), "--lambda-sweep", "0,0.2,1.0", "--out", s(&tmp.path().join("sweep"))]);
    let costs: Vec<f64> = csv_rows(&summary).iter().map(|r| r[6].parse().unwrap()).collect();
    assert_eq!(costs.len(), 3);
    assert!(costs.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{costs:?}");
}

#[test]
fn full_pipeline_passes_anchors() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("metrics");
    ok(&["analyze", "metrics", s(&repo("configs/default.toml")), "--crosstalk-victims", "1,9,30", "--out", s(&out)]);
    let table = ok(&["report", s(&out)]);
    assert!(!table.contains("FAIL"), "{table}");
    assert!(table.contains("overall: PASS"));
    assert!(out.join("report/anchors.csv").exists());
}

#[test]
fn noisy_detector_fails_nep_anchor() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("noisy.toml");
    std::fs::write(&cfg, "channel_count = 2\nseed = 3\n[detector]\ndcr_amp = 1e6\n").unwrap();
    let out = tmp.path().join("m");
    ok(&["analyze", "metrics", s(&cfg), "--out", s(&out)]);
    let table = ok(&["report", s(&out)]);
    let nep = table.lines().find(|l| l.starts_with("nep_min")).unwrap();
    assert!(nep.ends_with("FAIL"), "{nep}");
}

#[test]
fn report_on_empty_dir_lists_expected_files() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["report", s(tmp.path())]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("metrics.csv") && err.contains("crosstalk.csv"), "{err}");
}
