use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bellcert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bellcert")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

#[test]
fn delft_counts() {
    let out = bellcert(&[
        "analyze", "--game", "chsh", "--n", "245", "--wins", "196", "--tau-a", "1.08e-5", "--tau-b", "1.08e-5",
        "--format", "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema"], "bellcert.report/1");
    let p = v["rows"][0]["p_value"].as_f64().unwrap();
    assert!((0.038..=0.040).contains(&p), "{p}");
}

#[test]
fn json_is_deterministic() {
    let args = ["analyze", "--game", "cglmp3", "--n", "500", "--total", "1200", "--method", "all", "--format", "json"];
    assert_eq!(bellcert(&args).stdout, bellcert(&args).stdout);
}

#[test]
fn exit_codes() {
    assert_eq!(bellcert(&["analyze", "--game", "chsh", "--n", "10", "--wins", "11"]).status.code(), Some(2));
    assert_eq!(bellcert(&["analyze", "--game", "no-such-game", "--n", "10", "--wins", "1"]).status.code(), Some(2));
    assert_eq!(bellcert(&["frobnicate"]).status.code(), Some(2));
    // Score below the local bound: McDiarmid has no evidence to report.
    let weak = bellcert(&["analyze", "--game", "cglmp3", "--n", "500", "--total", "900", "--method", "mcdiarmid"]);
    assert_eq!(weak.status.code(), Some(3));
    let binomial = bellcert(&["analyze", "--game", "cglmp3", "--n", "5", "--total", "10", "--method", "binomial"]);
    assert_eq!(binomial.status.code(), Some(3));
}

#[test]
fn enumeration_cap_from_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_bellcert"))
        .args(["design", "classical-bound", "--game", "cglmp3"])
        .env("BELLCERT_CAP", "10")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn combine_pair() {
    let out = bellcert(&["combine", "0.1", "0.1", "--format", "json"]);
    assert!((json(&out)["p_value"].as_f64().unwrap() - 0.0560517).abs() < 1e-7);
}

#[test]
fn sweep_threshold() {
    let out = bellcert(&[
        "sweep", "--game", "chsh", "--grid", "s=2.2", "--method", "binomial", "--target", "0.01", "--tau-a", "1.08e-5",
        "--tau-b", "1.08e-5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let row = text.lines().nth(1).unwrap();
    let n: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((n - 1635.0).abs() / 1635.0 <= 0.02, "{row}");
}

#[test]
fn sweep_grid_csv() {
    let out = bellcert(&["sweep", "--game", "chsh", "--grid", "n=100,200;s=2.4:2.6:0.1", "--method", "binomial,azuma"]);
    let text = stdout(&out);
    assert_eq!(text.lines().next(), Some("n,s,method,p_value,raw_value,precondition_failed"));
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 2);
}

#[test]
fn simulate_then_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let trials = dir.path().join("trials.csv");
    let trials = trials.to_str().unwrap();
    let sim = bellcert(&["simulate", "--game", "chsh", "--trials", "300", "--seed", "11", "--out", trials, "--format", "json"]);
    assert_eq!(sim.status.code(), Some(0));
    let wins = json(&sim)["wins"].as_u64().unwrap();
    let analyzed = bellcert(&["analyze", "--game", "chsh", "--trials", trials, "--format", "json"]);
    let v = json(&analyzed);
    assert_eq!(v["n"], 300);
    assert_eq!(v["wins"].as_u64(), Some(wins));
    assert_eq!(v["rows"][0]["p_value"], json(&sim)["p_value"]);
}

#[test]
fn same_seed_same_trials() {
    let run = || bellcert(&["simulate", "--game", "chsh", "--trials", "50", "--seed", "3", "--strategy", "switcher"]).stdout;
    assert_eq!(run(), run());
}

#[test]
fn empty_trial_file_is_no_evidence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    std::fs::write(&path, "").unwrap();
    let out = bellcert(&["analyze", "--game", "chsh", "--trials", path.to_str().unwrap(), "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["rows"][0]["p_value"], 1.0);
}

#[test]
fn select_writes_a_usable_game() {
    let dir = tempfile::tempdir().unwrap();
    let behavior = dir.path().join("pr.json");
    let mut table = serde_json::Map::new();
    for (x0, x1) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        let row: Vec<f64> = (0..4).map(|o| if ((o >> 1) ^ (o & 1)) == (x0 & x1) { 0.5 } else { 0.0 }).collect();
        table.insert(format!("{x0},{x1}"), row.into());
    }
    let doc = serde_json::json!({ "inputs": [2, 2], "outputs": [2, 2], "table": table });
    std::fs::write(&behavior, doc.to_string()).unwrap();
    let game = dir.path().join("game.json");
    let out = bellcert(&[
        "design", "select", "--behavior", behavior.to_str().unwrap(), "--winlose", "--game-out", game.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(Path::new(&game).exists());
    let beta = bellcert(&["design", "beta", "--game", game.to_str().unwrap(), "--format", "json"]);
    assert!((json(&beta)["beta_win"].as_f64().unwrap() - 0.75).abs() < 1e-9);

    let locality = bellcert(&["design", "locality", "--behavior", behavior.to_str().unwrap(), "--format", "json"]);
    assert_eq!(json(&locality)["verdict"], "non_local");
}
