use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn streetlight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_streetlight"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = streetlight(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn simulate(dir: &TempDir, name: &str, scenario: &str, seed: &str) -> PathBuf {
    let out = dir.path().join(name);
    ok(&["simulate", scenario, "--seed", seed, "--out", p(&out)]);
    out
}

fn read(path: PathBuf) -> String {
    fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn simulate_writes_records_and_truth() {
    let dir = TempDir::new().unwrap();
    let out = simulate(&dir, "s", "straight", "1");
    let records = read(out.join("records.csv"));
    assert!(records.lines().count() > 100);
    let truth = read(out.join("truth.csv"));
    assert_eq!(truth.lines().count(), 12);
    assert!(out.join("run.json").exists());
}

#[test]
fn missing_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let missing = dir.path().join("absent.csv");
    assert_eq!(streetlight(&["cluster", p(&missing), "--out", p(&out)]).status.code(), Some(2));
    assert_eq!(streetlight(&["simulate", "no-such-scenario", "--out", p(&out)]).status.code(), Some(2));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = TempDir::new().unwrap();
    let a = simulate(&dir, "a", "plus-crossing", "7");
    let b = simulate(&dir, "b", "plus-crossing", "7");
    for f in ["records.csv", "truth.csv", "run.json"] {
        assert_eq!(read(a.join(f)), read(b.join(f)), "{f}");
    }
    let c = simulate(&dir, "c", "plus-crossing", "8");
    assert_ne!(read(a.join("records.csv")), read(c.join("records.csv")));
}

#[test]
fn straight_road_clusters_into_one_sector() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(&dir, "s", "straight", "2");
    let out = dir.path().join("c");
    ok(&[
        "cluster",
        p(&sim.join("records.csv")),
        "--nodes",
        p(&sim.join("truth.csv")),
        "--seed",
        "2",
        "--generations",
        "30",
        "--out",
        p(&out),
    ]);
    let labels = read(out.join("labels.csv"));
    let mut lines = labels.lines();
    assert_eq!(lines.next(), Some("node,cluster"));
    let clusters: Vec<&str> = lines.map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(clusters.len(), 11);
    assert!(clusters.iter().all(|c| *c == clusters[0]));
    assert!(read(out.join("trace.csv")).lines().count() > 1);
}

#[test]
fn objective_weight_changes_the_search() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(&dir, "s", "plus-crossing", "3");
    let records = sim.join("records.csv");
    let run = |w1: &str| {
        let out = dir.path().join(format!("w{w1}"));
        ok(&["cluster", p(&records), "--w1", w1, "--generations", "10", "--seed", "3", "--out", p(&out)]);
        read(out.join("trace.csv"))
    };
    assert_ne!(run("0"), run("1"));
}

#[test]
fn interval_mode_is_recorded_in_the_run_file() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(&dir, "s", "straight", "4");
    let out = dir.path().join("c");
    ok(&[
        "cluster",
        p(&sim.join("records.csv")),
        "--paper-literal-sce",
        "--generations",
        "5",
        "--out",
        p(&out),
    ]);
    let run: serde_json::Value = serde_json::from_str(&read(out.join("run.json"))).unwrap();
    assert_eq!(run["config"]["cluster"]["ga"]["objective"]["sce_mode"], "paper-literal");
}

#[test]
fn evaluating_truth_against_itself_scores_one() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(&dir, "s", "grid-2x2", "5");
    let truth = sim.join("truth.csv");
    let out = dir.path().join("e");
    let stdout = ok(&["evaluate", p(&truth), p(&truth), "--out", p(&out)]).stdout;
    assert!(String::from_utf8_lossy(&stdout).starts_with("ari 1.0000"));

    // Same partition with renamed labels and shuffled rows.
    let text = read(truth.clone());
    let mut rows: Vec<String> = text
        .lines()
        .skip(1)
        .map(|l| {
            let (node, label) = l.split_once(',').unwrap();
            format!("{node},{}", label.parse::<usize>().unwrap() * 7 + 3)
        })
        .collect();
    rows.reverse();
    let renamed = dir.path().join("renamed.csv");
    fs::write(&renamed, format!("node,sector\n{}\n", rows.join("\n"))).unwrap();
    ok(&["evaluate", p(&renamed), p(&truth), "--out", p(&out)]);
    assert!(read(out.join("score.csv")).lines().nth(1).unwrap().starts_with("1,1,1,"));
}

#[test]
fn mismatched_node_sets_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(&dir, "s", "straight", "6");
    let truth = sim.join("truth.csv");
    let text = read(truth.clone());
    let short = dir.path().join("short.csv");
    let keep: Vec<&str> = text.lines().take(text.lines().count() - 1).collect();
    fs::write(&short, keep.join("\n") + "\n").unwrap();
    let out = streetlight(&["evaluate", p(&short), p(&truth), "--out", p(&dir.path().join("e"))]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_row_reports_its_line() {
    let dir = TempDir::new().unwrap();
    let sim = simulate(&dir, "s", "straight", "7");
    let text = read(sim.join("records.csv"));
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[3] = "this,is,not,a,record".into();
    let bad = dir.path().join("bad.csv");
    fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let out = streetlight(&["cluster", p(&bad), "--out", p(&dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("line 4"), "{stderr}");
}

#[test]
fn stored_run_file_reproduces_the_pipeline() {
    let dir = TempDir::new().unwrap();
    let first = dir.path().join("first");
    ok(&[
        "pipeline",
        "plus-crossing",
        "--seed",
        "9",
        "--loss",
        "0.1",
        "--generations",
        "15",
        "--out",
        p(&first),
    ]);
    let second = dir.path().join("second");
    ok(&["pipeline", "--config", p(&first.join("run.json")), "--out", p(&second)]);
    for f in ["records.csv", "truth.csv", "labels.csv", "trace.csv", "graph.txt", "score.csv", "run.json"] {
        assert_eq!(read(first.join(f)), read(second.join(f)), "{f}");
    }
    // A stored config for another command is refused.
    let out = streetlight(&["simulate", "--config", p(&first.join("run.json")), "--out", p(&second)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bench_prints_a_row_per_method() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("b");
    let stdout = ok(&[
        "bench",
        "straight",
        "--runs",
        "2",
        "--methods",
        "pkwik,threshold-components",
        "--out",
        p(&out),
    ])
    .stdout;
    let text = String::from_utf8_lossy(&stdout);
    assert!(text.contains("pkwik") && text.contains("threshold-components"));
    assert!(!text.contains("proposed"));
    assert_eq!(read(out.join("comparison.csv")).lines().count(), 5);
}
