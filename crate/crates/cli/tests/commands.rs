//! Command-line behaviour, exercised through the built binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use tempfile::TempDir;

fn chainstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chainstat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path
}

fn single_pair(dir: &TempDir, p: f64) -> PathBuf {
    let text = format!(
        r#"{{"nodes":["s","done"],"edges":[{{"from":"s","to":"s","prob":{}}},{{"from":"s","to":"done","prob":{p}}}],"terminals":["done"]}}"#,
        1.0 - p
    );
    write(dir, &format!("pair_{p}.json"), &text)
}

/// Two pairs connecting under AND; `w` counts steps the first waits.
fn two_pairs(dir: &TempDir, p: f64) -> PathBuf {
    let (s, f) = (p, 1.0 - p);
    let text = format!(
        r#"{{"nodes":["00","10","01","11"],"edges":[
            {{"from":"00","to":"00","prob":{}}},{{"from":"00","to":"10","prob":{}}},
            {{"from":"00","to":"01","prob":{}}},{{"from":"00","to":"11","prob":{}}},
            {{"from":"10","to":"10","prob":{f},"counters":{{"w":1}}}},{{"from":"10","to":"11","prob":{s},"counters":{{"w":1}}}},
            {{"from":"01","to":"01","prob":{f}}},{{"from":"01","to":"11","prob":{s}}}],
            "terminals":["11"]}}"#,
        f * f,
        s * f,
        f * s,
        s * s
    );
    write(dir, "two_pairs.json", &text)
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

fn column(csv: &str, i: usize) -> Vec<f64> {
    rows(csv).iter().map(|r| r[i].parse().unwrap()).collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn pmf_of_single_pair_is_geometric() {
    let dir = TempDir::new().unwrap();
    let g = single_pair(&dir, 0.5);
    for method in ["power", "residue", "auto"] {
        let csv = stdout(&chainstat(&["pmf", "--config", p(&g), "--t-max", "4", "--method", method]));
        assert!(csv.starts_with("t,p_t,cdf\n"));
        let pmf = column(&csv, 1);
        for (got, want) in pmf.iter().zip([0.5, 0.25, 0.125, 0.0625]) {
            assert!((got - want).abs() < 1e-12, "{method}: {got} vs {want}");
        }
        assert!((column(&csv, 2)[3] - 0.9375).abs() < 1e-12);
    }
}

#[test]
fn power_and_residue_agree() {
    let dir = TempDir::new().unwrap();
    let g = two_pairs(&dir, 0.3);
    let a = stdout(&chainstat(&["pmf", "--config", p(&g), "--t-max", "60", "--method", "power"]));
    let b = stdout(&chainstat(&["pmf", "--config", p(&g), "--t-max", "60", "--method", "residue"]));
    for i in [1, 2] {
        for (x, y) in column(&a, i).iter().zip(column(&b, i)) {
            assert!((x - y).abs() < 1e-9);
        }
    }
}

#[test]
fn repeated_pole_under_residue_exits_three() {
    let dir = TempDir::new().unwrap();
    let g = write(
        &dir,
        "seq.json",
        r#"{"nodes":["a","b","done"],"edges":[
            {"from":"a","to":"a","prob":0.5},{"from":"a","to":"b","prob":0.5},
            {"from":"b","to":"b","prob":0.5},{"from":"b","to":"done","prob":0.5}],"terminals":["done"]}"#,
    );
    let out = chainstat(&["pmf", "--config", p(&g), "--t-max", "5", "--method", "residue"]);
    assert_eq!(out.status.code(), Some(3));
    // `auto` falls back to powers: p_t = (t - 1) / 2^t.
    let csv = stdout(&chainstat(&["pmf", "--config", p(&g), "--t-max", "5"]));
    assert!((column(&csv, 1)[2] - 2.0 / 8.0).abs() < 1e-15);
    let json: Value = serde_json::from_str(&stdout(&chainstat(&["moments", "--config", p(&g)]))).unwrap();
    assert!((json["mean"].as_f64().unwrap() - 4.0).abs() < 1e-12);
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let no_terminals = write(
        &dir,
        "empty.json",
        r#"{"nodes":["s"],"edges":[{"from":"s","to":"s","prob":1.0}],"terminals":[]}"#,
    );
    assert_eq!(chainstat(&["pmf", "--config", p(&no_terminals), "--t-max", "3"]).status.code(), Some(2));
    let garbled = write(&dir, "bad.json", "{ not json");
    assert_eq!(chainstat(&["moments", "--config", p(&garbled)]).status.code(), Some(2));
    let missing = dir.path().join("absent.json");
    assert_eq!(chainstat(&["pmf", "--config", p(&missing), "--t-max", "3"]).status.code(), Some(2));
    assert_eq!(chainstat(&["pmf", "--t-max", "3"]).status.code(), Some(2));
    assert_eq!(chainstat(&["thresholds", "--p-grid", "0.1:0.9"]).status.code(), Some(2));
}

#[test]
fn moments_of_geometric_laws() {
    let dir = TempDir::new().unwrap();
    let json: Value =
        serde_json::from_str(&stdout(&chainstat(&["moments", "--config", p(&single_pair(&dir, 0.25))]))).unwrap();
    assert!((json["mean"].as_f64().unwrap() - 4.0).abs() < 1e-12);
    assert!((json["variance"].as_f64().unwrap() - 12.0).abs() < 1e-12);
    // P(T <= t) = 1 - 0.75^t first reaches 0.99 at t = 17.
    assert_eq!(json["cdf_99"].as_u64(), Some(17));
    let json: Value =
        serde_json::from_str(&stdout(&chainstat(&["moments", "--config", p(&single_pair(&dir, 1.0))]))).unwrap();
    assert_eq!(json["variance"].as_f64(), Some(0.0));
    assert_eq!(json["mean"].as_f64(), Some(1.0));
}

#[test]
fn moments_match_sampled_walks() {
    let dir = TempDir::new().unwrap();
    let g = two_pairs(&dir, 0.3);
    let json: Value = serde_json::from_str(&stdout(&chainstat(&["moments", "--config", p(&g)]))).unwrap();
    let mean = json["mean"].as_f64().unwrap();
    let var = json["variance"].as_f64().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let n = 1_000_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let (mut a, mut b, mut t) = (false, false, 0);
        while !(a && b) {
            a |= rng.gen_bool(0.3);
            b |= rng.gen_bool(0.3);
            t += 1;
        }
        sum += t as f64;
    }
    let sampled = sum / n as f64;
    assert!((sampled - mean).abs() < 3.0 * (var / n as f64).sqrt(), "{sampled} vs {mean}");
}

#[test]
fn error_counts_at_two_steps() {
    let dir = TempDir::new().unwrap();
    let g = two_pairs(&dir, 0.5);
    let out = chainstat(&["errors", "--config", p(&g), "--t", "2", "--eps", "0.1"]);
    let csv = stdout(&out);
    let probs = column(&csv, 1);
    assert!((probs[0] - 0.6).abs() < 1e-12);
    assert!((probs[1] - 0.4).abs() < 1e-12);
    let scalar: Value = serde_json::from_str(String::from_utf8_lossy(&out.stderr).trim()).unwrap();
    assert!((scalar["nonheralded_error"].as_f64().unwrap() - 0.04).abs() < 1e-12);

    let path = dir.path().join("errors.csv");
    let out = chainstat(&["errors", "--config", p(&g), "--t", "3", "--eps", "0", "--counter", "w", "--out", p(&path)]);
    let scalar: Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(scalar["nonheralded_error"].as_f64(), Some(0.0));
    assert!(fs::read_to_string(&path).unwrap().starts_with("k,p\n"));
}

#[test]
fn errors_without_counter_exit_two() {
    let dir = TempDir::new().unwrap();
    let g = single_pair(&dir, 0.5);
    assert_eq!(chainstat(&["errors", "--config", p(&g), "--t", "2"]).status.code(), Some(2));
    let g = two_pairs(&dir, 0.5);
    let out = chainstat(&["errors", "--config", p(&g), "--t", "2", "--counter", "x"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sweep_rates_beat_simplified_model() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("sweep.csv");
    stdout(&chainstat(&[
        "innsbruck", "sweep", "--q0", "2,4", "--p", "0.1", "--eps-w", "1e-4", "--samples", "100000", "--seed", "3",
        "--out", p(&out),
    ]));
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("q0,K,K_simplified\n"));
    let table = rows(&csv);
    assert_eq!(table.len(), 2);
    for r in &table {
        let (k, ks): (f64, f64) = (r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(k >= ks, "q0={}: {k} < {ks}", r[0]);
    }
    let manifest: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("sweep.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "innsbruck");
    assert_eq!(manifest["seed"].as_u64(), Some(3));
    assert_eq!(manifest["params"]["samples"].as_u64(), Some(100_000));
    assert_eq!(manifest["output_sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn single_rate_row_layout() {
    let csv = stdout(&chainstat(&["innsbruck", "--q0", "2", "--samples", "20000", "--lambda-grid", "0.8"]));
    assert!(csv.starts_with("q0,lambda,K,K_simplified,stderr,t_truncation\n"));
    let r = &rows(&csv)[0];
    assert_eq!(r[1].parse::<f64>().unwrap(), 0.8);
    assert!(r[5].parse::<usize>().unwrap() > 10);
    let csv = stdout(&chainstat(&["innsbruck", "--q0", "2", "--simplified"]));
    assert_eq!(rows(&csv)[0][2], "nan");
}

#[test]
fn zero_samples_exit_two() {
    assert_eq!(chainstat(&["innsbruck", "--samples", "0"]).status.code(), Some(2));
    assert_eq!(chainstat(&["innsbruck", "--lambda-grid", "0.4"]).status.code(), Some(2));
}

#[test]
fn too_few_samples_exit_four() {
    let out = chainstat(&["innsbruck", "--q0", "2", "--samples", "2", "--lambda-grid", "0.8", "--eps-w", "1e-2"]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn seeded_runs_are_identical() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for path in [&a, &b] {
        stdout(&chainstat(&["innsbruck", "--q0", "3", "--samples", "20000", "--seed", "11", "--out", p(path)]));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn thresholds_emit_both_modes() {
    let csv = stdout(&chainstat(&["thresholds", "--p-grid", "0.2:0.8:3", "--both"]));
    assert!(csv.starts_with("p,tau_seconds,mode\n"));
    let table = rows(&csv);
    assert_eq!(table.len(), 6);
    assert_eq!(table[0][2], "statistical");
    assert_eq!(table[5][2], "non-statistical");
    let csv = stdout(&chainstat(&["thresholds", "--p-grid", "0.5:0.5:1", "--f-init", "0.9"]));
    assert_eq!(rows(&csv)[0][1], "inf");
}
