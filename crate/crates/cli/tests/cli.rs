use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TREFOIL: &str = r#"{"n":5,"x":[1,2,3,4,5],"o":[4,5,1,2,3]}"#;
const UNKNOT: &str = r#"{"n":3,"x":[2,1,3],"o":[3,2,1]}"#;

fn gridknot(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridknot"))
        .current_dir(dir)
        .env_remove("GRIDKNOT_DATA_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gridknot(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn workdir() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("trefoil.json"), TREFOIL).unwrap();
    fs::write(dir.path().join("unknot.json"), UNKNOT).unwrap();
    dir
}

#[test]
fn validate_render_dual() {
    let dir = workdir();
    let p = dir.path();
    assert!(ok(p, &["validate", "-i", "trefoil.json"]).contains("crossings=3"));
    let picture = ok(p, &["render", "-i", "trefoil.json"]);
    assert_eq!(picture.lines().count(), 5);
    assert!(picture.lines().all(|l| l.chars().count() == 5));
    let dual = ok(p, &["dual", "-i", "trefoil.json"]);
    let v: serde_json::Value = serde_json::from_str(&dual).unwrap();
    assert_eq!(v["n"], 5);
    fs::write(p.join("dual.json"), &dual).unwrap();
    let back = ok(p, &["dual", "-i", "dual.json"]);
    let back: serde_json::Value = serde_json::from_str(&back).unwrap();
    assert_eq!(back, serde_json::from_str::<serde_json::Value>(TREFOIL).unwrap());
}

#[test]
fn invalid_and_missing_inputs_have_distinct_codes() {
    let dir = workdir();
    let p = dir.path();
    fs::write(p.join("bad.json"), r#"{"n":2,"x":[1,2],"o":[1,2]}"#).unwrap();
    assert_eq!(gridknot(p, &["validate", "-i", "bad.json"]).status.code(), Some(3));
    assert_eq!(gridknot(p, &["validate", "-i", "missing.json"]).status.code(), Some(4));
    assert_eq!(gridknot(p, &["no-such-command"]).status.code(), Some(2));
    assert_eq!(
        gridknot(p, &["move", "-i", "trefoil.json", "-m", "JUMP 3"]).status.code(),
        Some(3)
    );
}

#[test]
fn moves_from_flags_and_log_agree() {
    let dir = workdir();
    let p = dir.path();
    let a = ok(
        p,
        &["move", "-i", "trefoil.json", "-m", "TRANSLATE_ROWS 2", "-m", "STABILIZE 1 X NE"],
    );
    fs::write(p.join("log.txt"), "TRANSLATE_ROWS 2\nSTABILIZE 1 X NE\n").unwrap();
    let b = ok(p, &["move", "-i", "trefoil.json", "--log", "log.txt"]);
    assert_eq!(a, b);
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["n"], 6);
}

#[test]
fn simplify_exit_codes_and_certificate() {
    let dir = workdir();
    let p = dir.path();
    let out = gridknot(p, &["simplify", "-i", "trefoil.json"]);
    assert_eq!(out.status.code(), Some(10));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("knotted"));

    let stdout = ok(p, &["simplify", "-i", "unknot.json", "--certificate", "cert.txt"]);
    assert!(stdout.starts_with("unknot"));
    let cert = fs::read_to_string(p.join("cert.txt")).unwrap();
    let mut args = vec!["move", "-i", "unknot.json", "--log", "cert.txt"];
    let end = ok(p, &args);
    let end: serde_json::Value = serde_json::from_str(&end).unwrap();
    assert_eq!(end["n"], 2, "certificate {cert:?} does not reach the 2x2 diagram");

    // a 1-state budget cannot decide a scrambled unknot
    ok(
        p,
        &[
            "move", "-i", "unknot.json", "-o", "big.json", "-m", "STABILIZE 1 X SW", "-m", "STABILIZE 2 O NE",
        ],
    );
    args = vec!["simplify", "-i", "big.json", "--max-states", "1"];
    let code = gridknot(p, &args).status.code();
    assert!(code == Some(11) || code == Some(0), "{code:?}");
}

#[test]
fn generate_is_byte_identical_across_runs_and_threads() {
    let dir = workdir();
    let p = dir.path();
    let base = ["generate", "--seed", "7", "--classes", "first:4", "--batches", "2", "--batch-size", "16"];
    let mut a = base.to_vec();
    a.extend(["-o", "a.jsonl"]);
    let mut b = base.to_vec();
    b.extend(["-o", "b.jsonl", "--threads", "3"]);
    ok(p, &a);
    ok(p, &a[..a.len() - 1].iter().copied().chain(["c.jsonl"]).collect::<Vec<_>>());
    ok(p, &b);
    let a_bytes = fs::read(p.join("a.jsonl")).unwrap();
    assert_eq!(a_bytes, fs::read(p.join("b.jsonl")).unwrap());
    assert_eq!(a_bytes, fs::read(p.join("c.jsonl")).unwrap());
    let text = String::from_utf8(a_bytes).unwrap();
    assert_eq!(text.lines().count(), 32);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["label"].as_u64().unwrap() < 4);
        assert_eq!(v["x"].as_array().unwrap().len(), v["o"].as_array().unwrap().len());
    }
}

#[test]
fn generate_fixed_and_validation_sets() {
    let dir = workdir();
    let p = dir.path();
    ok(
        p,
        &[
            "generate", "--set", "fixed", "--classes", "0_1,3_1", "--complexity", "7", "--count", "10", "--balanced",
            "-o", "f.jsonl",
        ],
    );
    let text = fs::read_to_string(p.join("f.jsonl")).unwrap();
    let labels: Vec<u64> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["label"].as_u64().unwrap())
        .collect();
    assert_eq!(labels.len(), 10);
    assert_eq!(labels.iter().filter(|&&l| l == 0).count(), 5);

    ok(
        p,
        &["generate", "--set", "validation", "--classes", "first:3", "--validation-count", "9", "-o", "v.jsonl"],
    );
    assert_eq!(fs::read_to_string(p.join("v.jsonl")).unwrap().lines().count(), 9);
}

#[test]
fn train_eval_tta_sweep_pipeline() {
    let dir = workdir();
    let p = dir.path();
    ok(
        p,
        &[
            "generate", "--set", "fixed", "--classes", "first:3", "--complexity", "8", "--count", "24", "--balanced",
        ],
    );
    assert!(p.join("data/dataset.jsonl").exists());
    let train = [
        "train", "--classes", "first:3", "--hidden-dim", "6", "--steps", "20", "--epoch-size", "10", "--batch-size",
        "8", "--validation-count", "12", "--history", "history.csv",
    ];
    ok(p, &train);
    let model = fs::read(p.join("data/model.json")).unwrap();
    let history = fs::read_to_string(p.join("history.csv")).unwrap();
    assert_eq!(
        history.lines().next().unwrap(),
        "epoch,step,train_loss,train_accuracy,val_loss,val_accuracy"
    );
    assert_eq!(history.lines().count(), 3);
    let mut train_threads = train.to_vec();
    train_threads.extend(["--threads", "2"]);
    ok(p, &train_threads);
    assert_eq!(model, fs::read(p.join("data/model.json")).unwrap());

    let stdout = ok(
        p,
        &["eval", "--confusion", "cm.csv", "--confusion-svg", "cm.svg", "--report", "report.csv", "--threshold", "2"],
    );
    assert!(stdout.starts_with("samples 24 accuracy"));
    let cm = fs::read_to_string(p.join("cm.csv")).unwrap();
    assert_eq!(cm.lines().next().unwrap(), "true\\pred,0_1,3_1,4_1");
    let total: u64 = cm
        .lines()
        .skip(1)
        .flat_map(|l| l.split(',').skip(1).map(|v| v.parse::<u64>().unwrap()).collect::<Vec<_>>())
        .sum();
    assert_eq!(total, 24);
    assert!(fs::read_to_string(p.join("cm.svg")).unwrap().starts_with("<svg"));
    let report = fs::read_to_string(p.join("report.csv")).unwrap();
    assert_eq!(report.lines().next().unwrap(), "class,precision,recall,f1,support");
    assert_eq!(report.lines().count(), 5);

    ok(p, &["eval", "--tta", "3"]);
    let curve = ok(p, &["tta", "--steps", "3"]);
    assert_eq!(curve.lines().collect::<Vec<_>>()[0], "j,accuracy");
    assert_eq!(curve.lines().count(), 5);

    let sweep = ok(
        p,
        &["sweep", "--complexities", "8,9", "--samples", "4", "--warmup", "5", "--step", "5", "--probes", "2"],
    );
    assert_eq!(sweep.lines().next().unwrap(), "complexity,5,10");
    assert_eq!(sweep.lines().count(), 3);
}

#[test]
fn f32_checkpoints_evaluate() {
    let dir = workdir();
    let p = dir.path();
    ok(
        p,
        &[
            "train", "--classes", "first:2", "--hidden-dim", "4", "--steps", "5", "--batch-size", "4", "--dtype",
            "f32", "--no-validation", "-o", "m32.json",
        ],
    );
    let ckpt: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("m32.json")).unwrap()).unwrap();
    assert_eq!(ckpt["dtype"], "f32");
    ok(
        p,
        &["generate", "--set", "fixed", "--classes", "first:2", "--complexity", "6", "--count", "6", "-o", "d.jsonl"],
    );
    assert!(ok(p, &["eval", "--ckpt", "m32.json", "--dataset", "d.jsonl"]).contains("accuracy"));
}

#[test]
fn compare_writes_both_curves() {
    let dir = workdir();
    let p = dir.path();
    ok(
        p,
        &[
            "compare", "--classes", "first:2", "--hidden-dim", "4", "--steps", "10", "--epoch-size", "5",
            "--batch-size", "4", "--validation-count", "6", "-o", "c.csv", "--svg", "c.svg",
        ],
    );
    let csv = fs::read_to_string(p.join("c.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| l.starts_with("internal,")).count(), 2);
    assert_eq!(csv.lines().filter(|l| l.starts_with("external,")).count(), 2);
    assert!(fs::read_to_string(p.join("c.svg")).unwrap().contains("<svg"));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = workdir();
    let p = dir.path();
    fs::write(
        p.join("run.toml"),
        "seed = 7\n[generator]\nclasses = \"first:4\"\nbatch_size = 16\n",
    )
    .unwrap();
    ok(p, &["--config", "run.toml", "generate", "--batches", "2", "-o", "from_file.jsonl"]);
    ok(
        p,
        &["generate", "--seed", "7", "--classes", "first:4", "--batch-size", "16", "--batches", "2", "-o", "flags.jsonl"],
    );
    assert_eq!(
        fs::read(p.join("from_file.jsonl")).unwrap(),
        fs::read(p.join("flags.jsonl")).unwrap()
    );
    ok(p, &["--config", "run.toml", "generate", "--seed", "8", "--batches", "2", "-o", "override.jsonl"]);
    assert_ne!(
        fs::read(p.join("from_file.jsonl")).unwrap(),
        fs::read(p.join("override.jsonl")).unwrap()
    );

    fs::write(p.join("typo.toml"), "[generator]\nclases = \"all\"\n").unwrap();
    assert_eq!(
        gridknot(p, &["--config", "typo.toml", "generate"]).status.code(),
        Some(3)
    );
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = workdir();
    for entry in fs::read_dir(&root).unwrap() {
        let path = entry.unwrap().path();
        let out = gridknot(
            dir.path(),
            &["--config", path.to_str().unwrap(), "generate", "--batch-size", "2", "-o", "x.jsonl"],
        );
        assert!(out.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn data_dir_flag_and_env() {
    let dir = workdir();
    let p = dir.path();
    ok(p, &["--data-dir", "elsewhere", "generate", "--classes", "first:2", "--batch-size", "2"]);
    assert!(p.join("elsewhere/dataset.jsonl").exists());
    let out = Command::new(env!("CARGO_BIN_EXE_gridknot"))
        .current_dir(p)
        .env("GRIDKNOT_DATA_DIR", "from_env")
        .args(["generate", "--classes", "first:2", "--batch-size", "2"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(p.join("from_env/dataset.jsonl").exists());
}

#[test]
fn stdin_input() {
    use std::io::Write;
    use std::process::Stdio;
    let dir = workdir();
    let mut child = Command::new(env!("CARGO_BIN_EXE_gridknot"))
        .current_dir(dir.path())
        .args(["validate", "-i", "-"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    child.stdin.take().unwrap().write_all(TREFOIL.as_bytes()).unwrap();
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("n=5"));
}
