use asep_cli::record::ResultRecord;
use std::path::PathBuf;
use std::process::{Command, Output};

fn asep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_asep")).args(args).output().expect("spawn asep")
}

fn records(out: &Output) -> Vec<ResultRecord> {
    String::from_utf8_lossy(&out.stdout).lines().map(|l| ResultRecord::from_line(l).unwrap()).collect()
}

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn check_golden(command: &str, name: &str, tol: f64) {
    let cfg = golden(&format!("{name}.jsonl"));
    let out = asep(&[command, "--no-timing", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let expected: Vec<ResultRecord> = std::fs::read_to_string(golden(&format!("{name}.expected")))
        .unwrap()
        .lines()
        .map(|l| ResultRecord::from_line(l).unwrap())
        .collect();
    let got = records(&out);
    assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(&expected) {
        assert_eq!(g.command, e.command);
        assert_eq!(g.input, e.input);
        assert_eq!(g.method, e.method);
        assert!((g.value - e.value).abs() <= tol, "{name}: {} vs {}", g.value, e.value);
    }
}

#[test]
fn golden_poisson() {
    check_golden("green", "poisson", 1e-14);
    let v = records(&asep(&["green", "--no-timing", "--config", golden("poisson.jsonl").to_str().unwrap()]))[0].value;
    assert!((v - 0.18394).abs() < 1e-5);
}

#[test]
fn golden_table() {
    check_golden("green", "table", 1e-12);
}

#[test]
fn golden_crossing() {
    check_golden("crossing", "crossing", 1e-12);
}

#[test]
fn golden_wall() {
    check_golden("wall", "wall", 1e-12);
}

#[test]
fn time_zero_identity_is_exact() {
    let out = asep(&[
        "green",
        "--no-timing",
        "--query",
        r#"{"model":"two_species","initial":{"positions":[0,1,4],"species":[2,1,1]},"final":{"positions":[0,1,4],"species":[2,1,1]},"t":0.0}"#,
    ]);
    let r = &records(&out)[0];
    assert_eq!(r.value, 1.0);
    assert_eq!(r.method, "laurent");
}

#[test]
fn narrow_wall_window_is_zero() {
    let out = asep(&["wall", "--no-timing", "--query", r#"{"form":"bernoulli","s1":0,"s2":1,"rho":0.5,"n":3,"m":1,"t":1.0}"#]);
    assert!(out.status.success());
    assert_eq!(records(&out)[0].value, 0.0);
}

#[test]
fn exit_codes() {
    assert_eq!(asep(&["green", "--query", "{nope"]).status.code(), Some(2));
    assert_eq!(asep(&["green"]).status.code(), Some(2));
    assert_eq!(asep(&["crossing", "--config", golden("wall.jsonl").to_str().unwrap()]).status.code(), Some(2));
    let sim = r#"{"initial":{"fixed":{"positions":[0],"species":[1]}},"t":1.0,"samples":100}"#;
    assert_eq!(asep(&["simulate", "--budget", "10", "--query", sim]).status.code(), Some(4));
    assert_eq!(asep(&["verify", "--query", r#"{"samples":2,"perturb":1.01}"#]).status.code(), Some(3));
    assert_eq!(asep(&["verify", "--query", r#"{"select":["nonexistent"]}"#]).status.code(), Some(2));
    assert_eq!(asep(&["green", "--query", r#"{"model":"rainbow","mu":[1,0],"nu":[0,1],"q":1.0,"t":1.0}"#]).status.code(), Some(2));
}

#[test]
fn out_file_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.jsonl");
    let p = path.to_str().unwrap();
    let cfg = golden("wall.jsonl");
    let a = asep(&["wall", "--no-timing", "--out", p, "--config", cfg.to_str().unwrap()]);
    let b = asep(&["wall", "--no-timing", "--out", p, "--config", cfg.to_str().unwrap()]);
    assert!(a.status.success() && b.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 2);
    assert_eq!(lines[0], lines[1]);
    let r = ResultRecord::from_line(lines[0]).unwrap();
    assert_eq!(r.to_line().unwrap(), lines[0]);
    assert_eq!(String::from_utf8_lossy(&a.stdout).trim_end(), lines[0]);
}

#[test]
fn csv_table_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    let cfg = golden("table.jsonl");
    let out = asep(&["green", "--no-timing", "--csv", path.to_str().unwrap(), "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().next(), Some("positions,species,probability"));
    assert_eq!(csv.lines().count(), 273);
}

#[test]
fn simulate_at_time_zero_returns_initial_state() {
    let out = asep(&[
        "simulate",
        "--no-timing",
        "--seed",
        "3",
        "--query",
        r#"{"initial":{"fixed":{"positions":[-1,2,3],"species":[2,2,1]}},"q":0.3,"t":0.0,"samples":50,"event":{"config":{"positions":[-1,2,3],"species":[2,2,1]}}}"#,
    ]);
    let r = &records(&out)[0];
    assert_eq!(r.value, 1.0);
    assert_eq!(r.est_err, 0.0);
}

#[test]
fn simulate_with_fixed_seed_is_bit_identical() {
    let q = r#"{"initial":{"bernoulli_step":{"rho":0.7,"m":1,"n":3}},"q":0.25,"t":1.5,"samples":3000}"#;
    let runs: Vec<Vec<u8>> = ["1", "3", "1"]
        .iter()
        .map(|th| asep(&["simulate", "--no-timing", "--seed", "11", "--threads", th, "--query", q]).stdout)
        .collect();
    assert!(!runs[0].is_empty());
    assert_eq!(runs[0], runs[1]);
    assert_eq!(runs[0], runs[2]);
    let other = asep(&["simulate", "--no-timing", "--seed", "12", "--query", q]).stdout;
    assert_ne!(runs[0], other);
}

#[test]
fn single_block_crossing_matches_colour_blind_transition() {
    let cross = asep(&[
        "crossing",
        "--no-timing",
        "--query",
        r#"{"model":"blocks","mu":[[1,0]],"lambda":[[3,1]],"q":0.0,"t":1.0,"formula":"symmetric"}"#,
    ]);
    let green = asep(&[
        "green",
        "--no-timing",
        "--query",
        r#"{"model":"two_species","initial":{"positions":[0,1],"species":[1,1]},"final":{"positions":[1,3],"species":[1,1]},"t":1.0}"#,
    ]);
    let (a, b) = (records(&cross)[0].value, records(&green)[0].value);
    assert!((a - b).abs() < 1e-10, "{a} vs {b}");
}
