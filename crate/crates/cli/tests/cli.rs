use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use riffle_cli::ballots::parse_ballots;
use riffle_cli::model_file::parse_model;
use tempfile::TempDir;

fn riffle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riffle")).args(args).output().expect("run riffle")
}

fn ok(args: &[&str]) -> String {
    let out = riffle(args);
    assert!(
        out.status.success(),
        "riffle {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    riffle(args).status.code().expect("exit code")
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const HIERARCHY: &str = "(([a,b] [c,d]) [e,f])\n";

/// Model over a..f on the six-item hierarchy, fitted to one ranking and
/// then to 400 of its own samples so every table is non-trivial.
fn fixture(dir: &TempDir) -> PathBuf {
    let h = path(dir, "h.txt");
    fs::write(&h, HIERARCHY).unwrap();
    let seed_data = path(dir, "seed.txt");
    fs::write(&seed_data, "items: a,b,c,d,e,f\na>b>c>d>e>f\nc>a>e>b>f>d\n").unwrap();
    let structure = format!("file:{}", s(&h));
    let m0 = path(dir, "m0.txt");
    ok(&["fit", "--data", s(&seed_data), "--structure", &structure, "--out", s(&m0), "--smoothing", "1"]);
    let samples = path(dir, "samples.txt");
    ok(&["sample", "--model", s(&m0), "--count", "400", "--seed", "3", "--out", s(&samples)]);
    let m = path(dir, "model.txt");
    ok(&["fit", "--data", s(&samples), "--structure", &structure, "--out", s(&m)]);
    m
}

#[test]
fn sample_is_deterministic_and_round_trips() {
    let dir = TempDir::new().unwrap();
    let m = fixture(&dir);
    let first = ok(&["sample", "--model", s(&m), "--count", "200", "--seed", "7"]);
    let second = ok(&["sample", "--model", s(&m), "--count", "200", "--seed", "7"]);
    assert_eq!(first, second);
    let other = ok(&["sample", "--model", s(&m), "--count", "200", "--seed", "8"]);
    assert_ne!(first, other);

    let data = parse_ballots(&first).unwrap();
    assert_eq!(data.total_count(), 200);
    assert!(data.all_full());
    // identical multiset of rankings, read straight off the text
    let mut from_text: HashMap<Vec<String>, u64> = HashMap::new();
    for line in first.lines().skip(1) {
        *from_text.entry(line.split('>').map(str::to_string).collect()).or_default() += 1;
    }
    let mut parsed: HashMap<Vec<String>, u64> = HashMap::new();
    for r in data.records() {
        let names = r.ranking.blocks().iter().map(|b| data.items().name(b[0]).to_string()).collect();
        *parsed.entry(names).or_default() += r.count;
    }
    assert_eq!(from_text, parsed);
}

#[test]
fn fit_trace_is_monotone() {
    let dir = TempDir::new().unwrap();
    let m = fixture(&dir);
    // partial data: truncate the samples to top-2 ballots, half of them
    let samples = ok(&["sample", "--model", s(&m), "--count", "600", "--seed", "11"]);
    let mut ballots = String::new();
    for (k, line) in samples.lines().enumerate() {
        if k > 0 && k % 2 == 0 {
            let top: Vec<&str> = line.split('>').take(2).collect();
            ballots.push_str(&top.join(">"));
        } else {
            ballots.push_str(line);
        }
        ballots.push('\n');
    }
    let data = path(&dir, "partial.txt");
    fs::write(&data, ballots).unwrap();
    for structure in ["chain", "flat"] {
        let out = path(&dir, &format!("fit-{structure}.txt"));
        let trace = path(&dir, &format!("fit-{structure}.csv"));
        ok(&[
            "fit", "--data", s(&data), "--structure", structure, "--out", s(&out), "--trace", s(&trace),
            "--tol", "1e-9",
        ]);
        let text = fs::read_to_string(&trace).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("iteration,loglik"));
        let ll: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
        assert!(ll.len() >= 3, "{structure}: {ll:?}");
        for w in ll.windows(2) {
            assert!(w[1] >= w[0] - 1e-9 * w[0].abs(), "{structure}: {} then {}", w[0], w[1]);
        }
    }
}

#[test]
fn fit_default_trace_path() {
    let dir = TempDir::new().unwrap();
    let data = path(&dir, "d.txt");
    fs::write(&data, "items: x,y,z\nx>y>z\n2x y>x\nz\n").unwrap();
    let out = path(&dir, "m.txt");
    ok(&["fit", "--data", s(&data), "--structure", "chain", "--out", s(&out)]);
    assert!(path(&dir, "m.txt.trace.csv").exists());
    parse_model(&fs::read_to_string(&out).unwrap()).unwrap();
}

#[test]
fn model_files_round_trip_through_commands() {
    let dir = TempDir::new().unwrap();
    let m = fixture(&dir);
    let text = fs::read_to_string(&m).unwrap();
    let model = parse_model(&text).unwrap();
    assert_eq!(riffle_cli::model_file::format_model(&model), text);
}

#[test]
fn trivial_condition_leaves_model_unchanged() {
    let dir = TempDir::new().unwrap();
    let m = fixture(&dir);
    let out = path(&dir, "post.txt");
    let stdout = ok(&["condition", "--model", s(&m), "--obs", "a,b,c,d,e,f", "--out", s(&out)]);
    let evidence: f64 = stdout.trim().strip_prefix("evidence: ").unwrap().parse().unwrap();
    assert!((evidence - 1.0).abs() < 1e-12);
    let before = parse_model(&fs::read_to_string(&m).unwrap()).unwrap();
    let after = parse_model(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(before, after);
}

#[test]
fn conditioned_model_gives_evidence_probability_one() {
    let dir = TempDir::new().unwrap();
    let m = fixture(&dir);
    for obs in ["a,c>b", "e>a>f", "b,d>a,c,e", "f>e>d>c>b>a"] {
        let post = path(&dir, "post.txt");
        ok(&["condition", "--model", s(&m), "--obs", obs, "--out", s(&post)]);
        let ballot = path(&dir, "obs.txt");
        fs::write(&ballot, format!("items: a,b,c,d,e,f\n{obs}\n")).unwrap();
        let csv = ok(&["query", "--model", s(&post), "--loglik", s(&ballot)]);
        let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        let p: f64 = row[3].parse().unwrap();
        assert!((p - 1.0).abs() <= 1e-12, "{obs}: {p}");
    }
}

#[test]
fn queries_emit_csv() {
    let dir = TempDir::new().unwrap();
    let m = fixture(&dir);
    let first = ok(&["query", "--model", s(&m), "--first-place"]);
    let mut lines = first.lines();
    assert_eq!(lines.next(), Some("item,probability"));
    let total: f64 = lines.map(|l| l.split(',').nth(1).unwrap().parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);

    let ab: f64 = ok(&["query", "--model", s(&m), "--pairwise", "a", "b"]).lines().nth(1).unwrap()
        .split(',').nth(2).unwrap().parse().unwrap();
    let ba: f64 = ok(&["query", "--model", s(&m), "--pairwise", "b", "a"]).lines().nth(1).unwrap()
        .split(',').nth(2).unwrap().parse().unwrap();
    assert!((ab + ba - 1.0).abs() < 1e-12);
}

#[test]
fn threads_do_not_change_output() {
    let dir = TempDir::new().unwrap();
    let m = fixture(&dir);
    let data = path(&dir, "d.txt");
    fs::write(&data, ok(&["sample", "--model", s(&m), "--count", "300", "--seed", "5"])).unwrap();
    let one = path(&dir, "one.txt");
    let four = path(&dir, "four.txt");
    ok(&["--threads", "1", "fit", "--data", s(&data), "--structure", "learn", "--out", s(&one)]);
    ok(&["fit", "--threads", "4", "--data", s(&data), "--structure", "learn", "--out", s(&four)]);
    assert_eq!(fs::read_to_string(&one).unwrap(), fs::read_to_string(&four).unwrap());
    assert_eq!(
        fs::read_to_string(path(&dir, "one.txt.trace.csv")).unwrap(),
        fs::read_to_string(path(&dir, "four.txt.trace.csv")).unwrap()
    );
}

#[test]
fn evaluate_emits_one_row_per_setting() {
    let dir = TempDir::new().unwrap();
    let m = fixture(&dir);
    let samples = ok(&["sample", "--model", s(&m), "--count", "200", "--seed", "9"]);
    let mut train = String::new();
    for (k, line) in samples.lines().enumerate() {
        if k > 50 {
            let top: Vec<&str> = line.split('>').take(1 + k % 3).collect();
            train.push_str(&top.join(">"));
        } else {
            train.push_str(line);
        }
        train.push('\n');
    }
    let train_path = path(&dir, "train.txt");
    let test_path = path(&dir, "test.txt");
    fs::write(&train_path, train).unwrap();
    fs::write(&test_path, ok(&["sample", "--model", s(&m), "--count", "100", "--seed", "10"])).unwrap();
    let args = [
        "evaluate", "--train", s(&train_path), "--test", s(&test_path), "--structure", "file:",
        "--partial-counts", "0,50,149", "--trials", "2",
    ];
    let h = path(&dir, "h.txt");
    let structure = format!("file:{}", s(&h));
    let mut args: Vec<&str> = args.to_vec();
    args[6] = &structure;
    let csv = ok(&args);
    let rows: Vec<Vec<&str>> = csv.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        assert_eq!(row.len(), 7);
        assert_eq!(row[0], "50");
        let test_ll: f64 = row[5].parse().unwrap();
        assert!(test_ll.is_finite() && test_ll < 0.0);
    }
    assert_eq!(csv, ok(&args));
    args.push("--partial-counts");
    args.push("151");
    assert_eq!(code(&args), 2);
}

#[test]
fn exit_codes() {
    let dir = TempDir::new().unwrap();
    let m = fixture(&dir);
    let missing = path(&dir, "missing.txt");
    let out = path(&dir, "out.txt");

    assert_eq!(code(&["sample", "--model", s(&missing), "--count", "3"]), 2);
    assert_eq!(code(&["query", "--model", s(&m), "--first-place", "--pairwise", "a", "b"]), 2);
    assert_eq!(code(&["query", "--model", s(&m)]), 2);
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["fit", "--data", s(&m), "--out", s(&out), "--structure", "tree"]), 2);

    let bad = path(&dir, "bad.txt");
    fs::write(&bad, "items: a,b,c\na>b\na>q\n").unwrap();
    let o = riffle(&["fit", "--data", s(&bad), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let unnormalized = path(&dir, "m9.txt");
    fs::write(&unnormalized, "items: a,b\nLEAF items=[a,b] table=[0.5,0.4]\n").unwrap();
    assert_eq!(code(&["query", "--model", s(&unnormalized), "--first-place"]), 3);
    assert_eq!(code(&["condition", "--model", s(&m), "--obs", "a>zz", "--out", s(&out)]), 3);
    assert_eq!(code(&["condition", "--model", s(&m), "--obs", "2x a", "--out", s(&out)]), 3);

    let post = path(&dir, "post.txt");
    ok(&["condition", "--model", s(&m), "--obs", "a>b", "--out", s(&post)]);
    assert_eq!(code(&["condition", "--model", s(&post), "--obs", "b", "--out", s(&out)]), 4);
    assert!(!out.exists());
}

#[test]
fn hand_written_uniform_leaf() {
    let dir = TempDir::new().unwrap();
    let m = path(&dir, "m.txt");
    fs::write(&m, "LEAF items=[0,1] table=[0.5,0.5]\n").unwrap();
    let csv = ok(&["query", "--model", s(&m), "--pairwise", "0", "1"]);
    assert_eq!(csv, "i,j,probability\n0,1,0.5\n");
}
