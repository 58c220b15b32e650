use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use densdiff::data::{load_csv, parse_labels, toy2_spec};
use densdiff::Dataset;
use serde_json::Value;

fn run(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densdiff"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn densdiff")
}

fn run_env(args: &[&str], cwd: &Path, key: &str, val: &str) -> Output {
    Command::new(env!("CARGO_BIN_EXE_densdiff"))
        .args(args)
        .current_dir(cwd)
        .env(key, val)
        .output()
        .expect("spawn densdiff")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn ok(args: &[&str], cwd: &Path) -> Output {
    let out = run(args, cwd);
    assert_eq!(code(&out), 0, "densdiff {args:?}: {}", stderr(&out));
    out
}

fn toy1(dir: &Path) {
    ok(
        &["toy", "--problem", "1", "--n", "30", "--nq", "30", "--prior-p", "0.3", "--prior-q", "0.7", "--seed", "7", "--out-dir", "toy"],
        dir,
    );
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn toy_problem_one_files() {
    let tmp = tempfile::tempdir().unwrap();
    toy1(tmp.path());
    let dir = tmp.path().join("toy");
    for (data, labels) in [("xp.csv", "labels_p.txt"), ("xq.csv", "labels_q.txt")] {
        let x: Dataset = load_csv(dir.join(data), b',', false).unwrap();
        assert_eq!((x.n(), x.dim()), (30, 2));
        let y = parse_labels(&fs::read_to_string(dir.join(labels)).unwrap()).unwrap();
        assert_eq!(y.len(), 30);
    }
    // X_p is drawn at the lower positive prior.
    let yp = parse_labels(&fs::read_to_string(dir.join("labels_p.txt")).unwrap()).unwrap();
    let yq = parse_labels(&fs::read_to_string(dir.join("labels_q.txt")).unwrap()).unwrap();
    let pos = |y: &[i8]| y.iter().filter(|&&v| v == 1).count();
    assert!(pos(&yp) < pos(&yq));
    let manifest = read_json(&dir.join("manifest.json"));
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["invocation"]["command"], "toy");
    assert_eq!(manifest["invocation"]["args"]["prior_p"], 0.3);
}

#[test]
fn toy_problem_two_has_four_modes() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["toy", "--problem", "2", "--n", "400", "--nq", "400", "--prior-p", "0.5", "--prior-q", "0.5", "--out-dir", "t"], tmp.path());
    let x: Dataset = load_csv(tmp.path().join("t/xp.csv"), b',', false).unwrap();
    let spec = toy2_spec();
    assert_eq!(spec.components.len(), 4);
    let mut hits = [0usize; 4];
    for i in 0..x.n() {
        let r = x.row(i);
        let nearest = spec
            .components
            .iter()
            .enumerate()
            .map(|(k, c)| (k, (r[0] - c.mean[0]).powi(2) + (r[1] - c.mean[1]).powi(2)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap()
            .0;
        hits[nearest] += 1;
    }
    assert!(hits.iter().all(|&h| h > 20), "{hits:?}");
}

#[test]
fn toy_rejects_bad_prior() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["toy", "--problem", "1", "--prior-p", "1.5"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("prior-p"));
}

#[test]
fn toy_hinge_writes_both_examples() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&["toy", "--problem", "hinge", "--n", "50", "--nq", "60", "--out-dir", "h"], tmp.path());
    let sep: Dataset = load_csv(tmp.path().join("h/separated_xq.csv"), b',', false).unwrap();
    let over: Dataset = load_csv(tmp.path().join("h/overlapping_xq.csv"), b',', false).unwrap();
    assert_eq!(sep.n(), 60);
    assert!((0..sep.n()).all(|i| sep.row(i)[1] >= 5.0));
    assert!((0..over.n()).any(|i| over.row(i)[1] < 5.0));
}

#[test]
fn label_happy_path() {
    let tmp = tempfile::tempdir().unwrap();
    toy1(tmp.path());
    ok(&["label", "--xp", "toy/xp.csv", "--xq", "toy/xq.csv", "--method", "dsdd", "--seed", "1"], tmp.path());
    let text = fs::read_to_string(tmp.path().join("labels.txt")).unwrap();
    let (p, q) = text.split_once("---\n").expect("separator record");
    assert_eq!(parse_labels(p).unwrap().len(), 30);
    assert_eq!(parse_labels(q).unwrap().len(), 30);
    let diag = read_json(&tmp.path().join("labels.diagnostics.json"));
    assert_eq!(diag["method"], "dsdd");
    assert!(diag["hyperparams"]["sigma"].as_f64().unwrap() > 0.0);
    let manifest = read_json(&tmp.path().join("labels.manifest.json"));
    assert_eq!(manifest["seed"], 1);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 2);
    assert!(tmp.path().join("labels.model.json").exists());
}

#[test]
fn label_fixed_hyperparameters_skip_cv() {
    let tmp = tempfile::tempdir().unwrap();
    toy1(tmp.path());
    ok(
        &["label", "--xp", "toy/xp.csv", "--xq", "toy/xq.csv", "--method", "lsdd", "--sigma", "0.7", "--lambda", "0.05", "--out", "o/l.txt"],
        tmp.path(),
    );
    let diag = read_json(&tmp.path().join("o/l.diagnostics.json"));
    assert_eq!(diag["hyperparams"]["sigma"], 0.7);
    assert_eq!(diag["hyperparams"]["lambda"], 0.05);
}

#[test]
fn label_usage_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    toy1(tmp.path());
    let out = run(&["label", "--xp", "toy/xp.csv", "--method", "dsdd"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("--xq"));
    let out = run(&["label", "--xp", "toy/xp.csv", "--xq", "toy/xq.csv", "--method", "smic"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("unknown method"));
    let out = run(&["label", "--xp", "toy/xp.csv", "--xq", "missing.csv", "--method", "kde"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("missing.csv"));
}

#[test]
fn label_solver_failure_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    toy1(tmp.path());
    // A near rank-one Gram with a negligible ridge cannot be factorized.
    let out = run(
        &["label", "--xp", "toy/xp.csv", "--xq", "toy/xq.csv", "--method", "lsdd", "--sigma", "1e6", "--lambda", "1e-300"],
        tmp.path(),
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

const KM_CONFIG: &str = r#"{
  "schema_version": 1,
  "methods": ["km"],
  "prior_p": 0.2,
  "prior_q": 0.8,
  "n": 40,
  "nq": 40,
  "trials": 5,
  "seed": 3
}"#;

#[test]
fn bench_config_reports_random_baseline() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.json"), KM_CONFIG).unwrap();
    let out = ok(&["bench", "--config", "c.json", "--out", "a.json"], tmp.path());
    let table = read_json(&tmp.path().join("a.json"));
    assert_eq!(table["m"], 80);
    let baseline = table["random_baseline"].as_f64().unwrap();
    assert_eq!(format!("{baseline:.3}"), "0.456");
    assert_eq!(table["rows"].as_array().unwrap().len(), 1);
    assert_eq!(table["rows"][0]["method"], "km");
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("km") && stdout.contains("random"));

    ok(&["bench", "--config", "c.json", "--out", "b.json"], tmp.path());
    assert_eq!(fs::read(tmp.path().join("a.json")).unwrap(), fs::read(tmp.path().join("b.json")).unwrap());
}

#[test]
fn bench_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("zero.json"), KM_CONFIG.replace("\"trials\": 5", "\"trials\": 0")).unwrap();
    let out = run(&["bench", "--config", "zero.json"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("trials"));

    let typo = KM_CONFIG.replace("\"seed\": 3", "\"seed\": 3, \"settings\": {\"foldz\": 3}");
    fs::write(tmp.path().join("typo.json"), typo).unwrap();
    let out = run(&["bench", "--config", "typo.json"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("settings.foldz"), "{}", stderr(&out));

    let out = run(&["bench", "--config", "zero.json", "--trials", "3"], tmp.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn bench_thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["bench", "--methods", "km,kde", "--n", "20", "--nq", "20", "--trials", "4", "--seed", "2"];
    let a = [&args[..], &["--out", "one.json"]].concat();
    let b = [&args[..], &["--out", "many.json"]].concat();
    assert_eq!(code(&run_env(&a, tmp.path(), "DENSDIFF_THREADS", "1")), 0);
    assert_eq!(code(&run_env(&b, tmp.path(), "DENSDIFF_THREADS", "3")), 0);
    assert_eq!(fs::read(tmp.path().join("one.json")).unwrap(), fs::read(tmp.path().join("many.json")).unwrap());
    assert_eq!(code(&run_env(&a, tmp.path(), "DENSDIFF_THREADS", "0")), 1);
}

fn write_model(path: &Path, centers: &str, alpha: &str) {
    let doc = format!(r#"{{"kind":"dsdd","sigma":1.0,"centers":{centers},"alpha":{alpha},"lambda":0.1}}"#);
    fs::write(path, doc).unwrap();
}

fn boundary_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x1,x2,g,sign"));
    lines.map(|l| l.split(',').map(String::from).collect()).collect()
}

#[test]
fn boundary_grid_shape_and_signs() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_model(&dir.join("m.json"), "[[0.0,0.0],[1.0,1.0]]", "[1.5,-2.0]");
    write_model(&dir.join("neg.json"), "[[0.0,0.0],[1.0,1.0]]", "[-1.5,2.0]");
    write_model(&dir.join("zero.json"), "[[0.0,0.0],[1.0,1.0]]", "[0.0,0.0]");
    ok(&["boundary", "--model", "m.json", "--grid", "-1,2,-1,2,3", "--out", "m.csv"], dir);
    ok(&["boundary", "--model", "neg.json", "--grid", "-1,2,-1,2,3", "--out", "neg.csv"], dir);
    ok(&["boundary", "--model", "zero.json", "--grid", "-1,2,-1,2,3", "--out", "zero.csv"], dir);
    let rows = boundary_rows(&dir.join("m.csv"));
    assert_eq!(rows.len(), 9);
    assert_eq!(rows[0][..2], ["-1".to_string(), "-1".to_string()]);
    assert_eq!(rows[8][..2], ["2".to_string(), "2".to_string()]);
    for (a, b) in rows.iter().zip(boundary_rows(&dir.join("neg.csv"))) {
        let g: f64 = a[2].parse().unwrap();
        assert_ne!(g, 0.0);
        assert_eq!(a[3].parse::<i8>().unwrap(), -b[3].parse::<i8>().unwrap());
    }
    assert!(boundary_rows(&dir.join("zero.csv")).iter().all(|r| r[3] == "1"));
}

#[test]
fn boundary_needs_two_dimensions() {
    let tmp = tempfile::tempdir().unwrap();
    write_model(&tmp.path().join("m3.json"), "[[0.0,0.0,0.0]]", "[1.0]");
    let out = run(&["boundary", "--model", "m3.json", "--grid", "0,1,0,1,2"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("2-dimensional"));
    let out = run(&["boundary", "--model", "m3.json", "--grid", "0,1,0"], tmp.path());
    assert_eq!(code(&out), 1);
}

#[test]
fn replay_rejects_changed_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    toy1(tmp.path());
    ok(&["label", "--xp", "toy/xp.csv", "--xq", "toy/xq.csv", "--method", "kde", "--out", "k/labels.txt"], tmp.path());
    ok(&["replay", "k/labels.manifest.json", "--out-dir", "again"], tmp.path());
    assert_eq!(
        fs::read(tmp.path().join("k/labels.txt")).unwrap(),
        fs::read(tmp.path().join("again/labels.txt")).unwrap()
    );
    fs::write(tmp.path().join("toy/xq.csv"), "0,0\n1,1\n").unwrap();
    let out = run(&["replay", "k/labels.manifest.json", "--out-dir", "again2"], tmp.path());
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("changed"));
}

#[test]
fn help_and_version_exit_zero() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(code(&run(&["--help"], tmp.path())), 0);
    assert_eq!(code(&run(&["--version"], tmp.path())), 0);
    assert_eq!(code(&run(&["label", "--help"], tmp.path())), 0);
    assert_eq!(code(&run(&["frobnicate"], tmp.path())), 1);
}
