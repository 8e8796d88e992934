use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pigrammar::grammar::Pcfg;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pigrammar"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "{e}: {}\n{}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn grammar(dir: &TempDir, productions: &str) -> PathBuf {
    let p = dir.path().join("g.pcfg");
    Pcfg::from_productions("test", productions)
        .unwrap()
        .save(&p)
        .unwrap();
    p
}

#[test]
fn induce_writes_valid_grammar() {
    let dir = TempDir::new().unwrap();
    let corpus = write(
        &dir,
        "c.txt",
        "SIL a b c SIL\nSIL a b c SIL\nSIL a d c SIL\n# comment\n\nSIL a d c SIL\n",
    );
    let g = dir.path().join("g.pcfg");
    let out = run(&["induce", s(&corpus), "-o", s(&g)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("log-likelihood"));
    let g = Pcfg::load(&g).unwrap();
    assert!(g.validate().is_empty());
    assert!(g.terminal_id("d").is_some());
}

#[test]
fn induce_missing_corpus_fails() {
    let dir = TempDir::new().unwrap();
    let out = run(&[
        "induce",
        s(&dir.path().join("nope.txt")),
        "-o",
        s(&dir.path().join("g")),
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert!(!dir.path().join("g").exists());
}

#[test]
fn induce_without_iterations_memorizes() {
    let dir = TempDir::new().unwrap();
    let corpus = write(&dir, "c.txt", "SIL a b SIL\nSIL a b SIL\nSIL b a SIL\n");
    let g = dir.path().join("g.pcfg");
    let out = run(&[
        "induce",
        s(&corpus),
        "-o",
        s(&g),
        "--max-iterations",
        "0",
        "--json",
    ]);
    assert_eq!(code(&out), 0);
    let v = stdout_json(&out);
    assert!(v["log_likelihood"].as_f64().unwrap().is_finite());
    let g = Pcfg::load(&g).unwrap();
    assert_eq!(g.rules_of(g.start()).len(), 2);
}

#[test]
fn parse_one_hot_matrix() {
    let dir = TempDir::new().unwrap();
    let g = grammar(&dir, "S -> SIL a b SIL");
    let m = write(&dir, "m.csv", "y0,y1\n1,0\n1,0\n0,1\n0,1\n");
    let out = run(&["parse", s(&m), "-g", s(&g), "--classes", "a,b"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    assert_eq!(v["sentence"], serde_json::json!(["a", "b"]));
    assert_eq!(v["frame_labels"], serde_json::json!([0, 0, 1, 1]));
    let p = v["data_prob"].as_f64().unwrap();
    assert!(p <= 1.0 && p > 1.0 - 1e-9, "{p}");
    assert_eq!(v["fallback_used"], Value::Bool(false));
}

#[test]
fn parse_two_frames() {
    let dir = TempDir::new().unwrap();
    let g = grammar(&dir, "S -> a b");
    let m = write(&dir, "m.csv", "y0,y1\n0.6,0.4\n0.3,0.7\n");
    let o = dir.path().join("r.json");
    let out = run(&["parse", s(&m), "-g", s(&g), "--classes", "a,b", "-o", s(&o)]);
    assert_eq!(code(&out), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(&o).unwrap()).unwrap();
    assert_eq!(v["frame_labels"], serde_json::json!([0, 1]));
    assert!((v["data_prob"].as_f64().unwrap() - 0.42).abs() < 1e-12);
    assert!((v["combined_score"].as_f64().unwrap() - 0.42f64.ln()).abs() < 1e-12);
}

#[test]
fn parse_rejects_bad_magic() {
    let dir = TempDir::new().unwrap();
    let g = grammar(&dir, "S -> a b");
    let m = write(&dir, "m.pmat", "XMAT garbage");
    let out = run(&["parse", s(&m), "-g", s(&g), "--classes", "a,b"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("PMAT"));
}

#[test]
fn parse_without_fallback_exits_2() {
    let dir = TempDir::new().unwrap();
    let g = grammar(&dir, "S -> a b");
    let m = write(&dir, "m.csv", "y0,y1\n0.6,0.4\n");
    let out = run(&[
        "parse",
        s(&m),
        "-g",
        s(&g),
        "--classes",
        "a,b",
        "--no-fallback",
    ]);
    assert_eq!(code(&out), 2);
    let out = run(&["parse", s(&m), "-g", s(&g), "--classes", "a,b"]);
    assert_eq!(code(&out), 0);
    assert_eq!(stdout_json(&out)["fallback_used"], Value::Bool(true));
}

fn synth(dir: &Path, seed: &str) {
    let out = run(&[
        "synth",
        "-o",
        s(dir),
        "-n",
        "12",
        "--epsilon",
        "0.7",
        "--seed",
        seed,
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn dir_contents(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

#[test]
fn batch_output_does_not_depend_on_jobs() {
    let dir = TempDir::new().unwrap();
    let episodes = dir.path().join("episodes");
    synth(&episodes, "3");
    let g = dir.path().join("g.pcfg");
    pigrammar::synth::reference_grammar().save(&g).unwrap();
    let mut outputs = Vec::new();
    for jobs in ["1", "4"] {
        let o = dir.path().join(format!("out{jobs}"));
        let out = run(&[
            "parse",
            "--batch",
            s(&episodes),
            "-g",
            s(&g),
            "-o",
            s(&o),
            "--jobs",
            jobs,
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(dir_contents(&o));
    }
    assert_eq!(outputs[0].len(), 12);
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn eval_reports() {
    let dir = TempDir::new().unwrap();
    let gt = write(&dir, "gt", "0\n0\n1\n2\n");
    let pred = write(&dir, "pred", "0 1\n1\n2\n");
    let out = run(&["eval", s(&gt), s(&gt), "--json"]);
    assert_eq!(stdout_json(&out)["micro_pr"].as_f64(), Some(1.0));
    let out = run(&["eval", s(&pred), s(&gt), "--json"]);
    let v = stdout_json(&out);
    assert!((v["micro_pr"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    assert!((v["weighted_f1"].as_f64().unwrap() - 0.75).abs() < 1e-12);
    let out = run(&["eval", s(&pred), s(&gt), "--names", "x,y,z"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains('y'));
}

#[test]
fn eval_length_mismatch_fails() {
    let dir = TempDir::new().unwrap();
    let a = write(&dir, "a", "0\n1\n");
    let b = write(&dir, "b", "0\n1\n1\n");
    let out = run(&["eval", s(&a), s(&b)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("length mismatch"));
}

#[test]
fn synth_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (
        dir.path().join("a"),
        dir.path().join("b"),
        dir.path().join("c"),
    );
    synth(&a, "5");
    synth(&b, "5");
    synth(&c, "6");
    assert_eq!(dir_contents(&a), dir_contents(&b));
    assert_ne!(dir_contents(&a), dir_contents(&c));
    assert!(a.join("episode_0011.pmat").exists() && a.join("episode_0011.gt").exists());
    let corpus = fs::read_to_string(a.join("corpus.txt")).unwrap();
    assert_eq!(corpus.lines().count(), 12);
    assert!(corpus
        .lines()
        .all(|l| l.starts_with("SIL ") && l.ends_with(" SIL")));
}

#[test]
fn bench_without_noise_gains_nothing() {
    let out = run(&["bench", "-n", "8", "--noise", "0", "--json"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = stdout_json(&out);
    let row = &v[0];
    assert_eq!(row["baseline_micro"].as_f64(), Some(1.0));
    assert_eq!(row["refined_micro"].as_f64(), Some(1.0));
    assert_eq!(row["delta"].as_f64(), Some(0.0));
}

#[test]
fn dot_matches_golden() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let out = run(&["dot", s(&golden.join("mini.pcfg"))]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        fs::read_to_string(golden.join("mini.dot")).unwrap()
    );
}
