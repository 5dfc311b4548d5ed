use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mrp_core::generator::{benchmark_scenarios, simulate_stream};
use mrp_core::io::{parse_events, EventFormat};
use serde_json::Value;

const QUICK: [&str; 10] = ["--k", "20", "--burn-in", "10", "--samples", "20", "--jobs", "1", "--seed", "3"];

fn mrp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrp")).args(args).output().unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = mrp(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn generate_then_infer_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = tmp.path().join("gen");
    ok(&["generate", "--scenario", "lambda1", "--seed", "5", "--out-dir", s(&gen)]);

    let expected = simulate_stream(&benchmark_scenarios(5).into_iter().find(|x| x.name == "lambda1").unwrap()).unwrap();
    let parsed = parse_events(&gen.join("events.csv"), EventFormat::Csv).unwrap();
    let times: Vec<f64> = parsed.events.iter().map(|e| e.time).collect();
    assert_eq!(times, expected.stream.times());
    assert!(gen.join("lambda1.truth.csv").exists());
    let truth: Value = serde_json::from_str(&fs::read_to_string(gen.join("truth.json")).unwrap()).unwrap();
    assert_eq!(truth["lambda1"]["a"], 3.0);

    let run = tmp.path().join("run");
    let events = gen.join("events.csv");
    let mut args = vec!["infer", s(&events), "--window", "0,50", "--out-dir", s(&run)];
    args.extend(QUICK);
    ok(&args);
    let m = manifest(&run);
    let stream = &m["streams"][0];
    assert_eq!(stream["label"], "lambda1");
    assert_eq!(stream["n_events"].as_u64().unwrap() as usize, expected.stream.len());
    let summary = fs::read_to_string(run.join("lambda1.summary.csv")).unwrap();
    assert!(summary.starts_with("time,mean,median,q025,q975"));
    assert_eq!(summary.lines().count(), 21);
    assert_eq!(fs::read_to_string(run.join("lambda1.draws.csv")).unwrap().lines().count(), 21);

    // Plot with and without the generated truth.
    ok(&["plot", s(&run)]);
    let svg = fs::read_to_string(run.join("lambda1.svg")).unwrap();
    assert!(svg.contains("class=\"median\"") && !svg.contains("class=\"truth\""));
    let plots = tmp.path().join("plots");
    ok(&["plot", s(&run), "--truth-dir", s(&gen), "--out-dir", s(&plots)]);
    assert!(fs::read_to_string(plots.join("lambda1.svg")).unwrap().contains("class=\"truth\""));
}

#[test]
fn same_seed_same_output() {
    let tmp = tempfile::tempdir().unwrap();
    let events = tmp.path().join("events.csv");
    fs::write(&events, "label,timestamp\na,1.5\na,2.25\na,7\nb,3\nb,3.5\nb,9.75\nb,12\n").unwrap();
    let mut runs = Vec::new();
    for name in ["one", "two"] {
        let dir = tmp.path().join(name);
        let mut args = vec!["infer", s(&events), "--out-dir", s(&dir)];
        args.extend(QUICK);
        ok(&args);
        runs.push((
            fs::read(dir.join("a.summary.csv")).unwrap(),
            fs::read(dir.join("b.draws.csv")).unwrap(),
        ));
    }
    assert_eq!(runs[0], runs[1]);
}

#[test]
fn icd9_grouping_and_dates() {
    let tmp = tempfile::tempdir().unwrap();
    let events = tmp.path().join("visits.tsv");
    fs::write(
        &events,
        "410.1\t2008-01-03\n401\t2008-01-03\n428\t2008-02-11\n250.0\t2008-03-01\nV70\t2008-03-02\n414.01\t2008-04-20\n",
    )
    .unwrap();
    let dir = tmp.path().join("out");
    let mut args = vec!["infer", s(&events), "--group", "icd9", "--out-dir", s(&dir)];
    args.extend(QUICK);
    ok(&args);
    let m = manifest(&dir);
    assert_eq!(m["date_origin"], "2008-01-03");
    let labels: Vec<&str> = m["streams"].as_array().unwrap().iter().map(|x| x["label"].as_str().unwrap()).collect();
    assert!(labels.contains(&"Cardiovascular"));
    let cardio = m["streams"].as_array().unwrap().iter().find(|x| x["label"] == "Cardiovascular").unwrap();
    assert_eq!(cardio["n_events"], 4);
    assert!(fs::read_to_string(dir.join("ungrouped.csv")).unwrap().contains("V70"));
}

#[test]
fn evaluate_writes_benchmark_table() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("eval");
    let mut args = vec!["evaluate", "--scenario", "lambda3", "--seeds", "1,2", "--out-dir", s(&dir)];
    args.extend(QUICK);
    ok(&args);
    let table = fs::read_to_string(dir.join("benchmark.csv")).unwrap();
    let rows: Vec<&str> = table.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "scenario,seed,n_events,rms,lp,coverage,runtime_s");
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("lambda3,1,") && rows[2].starts_with("lambda3,2,"));
    assert_eq!(manifest(&dir)["streams"].as_array().unwrap().len(), 2);
}

#[test]
fn bad_input_fails_with_message() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.csv");
    let out = mrp(&["infer", s(&missing), "--out-dir", s(tmp.path())]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("error"));

    let out = mrp(&["generate", "--scenario", "no-such-scenario", "--out-dir", s(tmp.path())]);
    assert!(!out.status.success());

    let out = mrp(&["infer", s(&missing), "--prior-l", "gauss:1"]);
    assert!(!out.status.success());
}
