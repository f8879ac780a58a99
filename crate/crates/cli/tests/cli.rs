use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use rtdc_core::gen::validate_record;

const REACTIVE: &str = r#"{"controllables": ["a1", "a2"], "uncontrollables": ["u1"],
 "constraints": [[{"kind": "distance", "to": "u1", "from": "a2", "lb": 0, "ub": 10}]],
 "contingencies": [{"source": "a1", "target": "u1", "intervals": [[2, 4]]}]}"#;

const FIXED_OFFSET: &str = r#"{"controllables": ["a1", "a2"], "uncontrollables": ["u1"],
 "constraints": [[{"kind": "bounded", "tp": "a1", "lb": 0, "ub": 1}],
                 [{"kind": "distance", "to": "a2", "from": "u1", "lb": 3, "ub": 3}]],
 "contingencies": [{"source": "a1", "target": "u1", "intervals": [[2, 4]]}]}"#;

const WINDOW: &str = r#"{"controllables": ["a1"], "constraints": [[{"kind": "bounded", "tp": "a1", "lb": 0, "ub": 5}]]}"#;

fn rtdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtdc")).args(args).output().expect("run rtdc")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn solve_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("r.dtnu");
    let strategy = dir.path().join("s.json");
    fs::write(&input, REACTIVE).unwrap();

    let o = rtdc(&["solve", "--input", p(&input), "--timeout", "20", "--out", p(&strategy)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("rtdc "));

    let o = rtdc(&["replay", "--strategy", p(&strategy), "--input", p(&input), "--samples", "1000"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("0 violations"));
}

#[test]
fn solve_reports_not_rtdc() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("f.dtnu");
    fs::write(&input, FIXED_OFFSET).unwrap();
    let o = rtdc(&["solve", "--input", p(&input)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("not-rtdc "));
}

#[test]
fn timeout_is_not_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = rtdc(&["gen", "--count", "1", "--seed", "0", "--out", p(dir.path())]);
    assert!(o.status.success());
    let input = dir.path().join("gen-000000.dtnu");
    let o = rtdc(&["solve", "--input", p(&input), "--timeout", "0.05"]);
    assert!(o.status.success());
    let verdict = stdout(&o);
    assert!(["rtdc ", "not-rtdc ", "timeout "].iter().any(|v| verdict.starts_with(v)));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("w.dtnu");
    fs::write(&input, WINDOW).unwrap();

    assert!(!rtdc(&["solve", "--input", p(&dir.path().join("missing.dtnu"))]).status.success());
    assert!(!rtdc(&["solve", "--input", p(&input), "--timeout", "soon"]).status.success());
    assert!(!rtdc(&["solve", "--input", p(&input), "--no-such-flag"]).status.success());
    assert!(!rtdc(&["frobnicate"]).status.success());
    assert!(!rtdc(&["solve", "--input", p(&input), "--order", "nonexistent"]).status.success());

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"start": 0, "outcome": [], "execute": [{"tp": "zz", "at": 1}]}"#).unwrap();
    assert!(!rtdc(&["replay", "--strategy", p(&bad), "--input", p(&input)]).status.success());
    fs::write(&bad, "not json").unwrap();
    assert!(!rtdc(&["replay", "--strategy", p(&bad), "--input", p(&input)]).status.success());
}

#[test]
fn replay_counts_violations() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("w.dtnu");
    fs::write(&input, WINDOW).unwrap();
    let late = dir.path().join("late.json");
    fs::write(&late, r#"{"start": 0, "outcome": [], "execute": [{"tp": "a1", "at": 7}]}"#).unwrap();
    let o = rtdc(&["replay", "--strategy", p(&late), "--input", p(&input), "--samples", "5"]);
    assert!(!o.status.success());
    assert!(!stdout(&o).starts_with("0 violations"));
}

fn read_records(path: &Path) -> Vec<(String, String, u64, u64)> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("instance,verdict,elapsed_ms,nodes"));
    lines
        .map(|l| {
            let f: Vec<_> = l.split(',').collect();
            (f[0].to_string(), f[1].to_string(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

fn verdict_counts(records: &[(String, String, u64, u64)]) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.1.clone()).or_insert(0) += 1;
    }
    m
}

#[test]
fn bench_parallelism_keeps_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let b = dir.path().join("b");
    fs::create_dir(&b).unwrap();
    fs::write(b.join("r.dtnu"), REACTIVE).unwrap();
    fs::write(b.join("f.dtnu"), FIXED_OFFSET).unwrap();
    fs::write(b.join("w.dtnu"), WINDOW).unwrap();
    fs::write(b.join("ignored.txt"), "x").unwrap();
    // generated seeds that the declaration order decides in milliseconds
    for seed in ["1", "3"] {
        assert!(rtdc(&["gen", "--count", "1", "--seed", seed, "--out", p(&b)]).status.success());
    }

    let one = dir.path().join("one.csv");
    let four = dir.path().join("four.csv");
    assert!(rtdc(&["bench", "--dir", p(&b), "--timeout", "30", "--jobs", "1", "--out", p(&one)]).status.success());
    assert!(rtdc(&["bench", "--dir", p(&b), "--timeout", "30", "--jobs", "4", "--out", p(&four)]).status.success());

    let (r1, r4) = (read_records(&one), read_records(&four));
    assert_eq!(r1.len(), 5);
    assert_eq!(verdict_counts(&r1), verdict_counts(&r4));
    assert!(r1.iter().all(|r| r.2 <= 30_000 + 1_000));

    let table = fs::read_to_string(dir.path().join("one.cumulative.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("time_s,solved_count"));
    let rows: Vec<(f64, usize)> = lines
        .map(|l| {
            let (t, c) = l.split_once(',').unwrap();
            (t.parse().unwrap(), c.parse().unwrap())
        })
        .collect();
    assert!(rows.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    let solved = r1.iter().filter(|r| r.1 != "timeout").count();
    assert_eq!(rows.last().unwrap().1, solved);
}

#[test]
fn label_writes_valid_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("data.jsonl");
    let o = rtdc(&[
        "label", "--count", "2", "--seed", "1", "--runs", "1", "--timeout", "0.05", "--jobs", "2", "--out", p(&out),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    let mut seeds = Vec::new();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        validate_record(&v).unwrap();
        seeds.push(v["seed"].as_u64().unwrap());
    }
    seeds.sort();
    assert_eq!(seeds, vec![1, 2]);
}
