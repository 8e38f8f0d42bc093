use std::fs;
use std::path::Path;
use std::process::ExitCode;

use hecvl::cli::main_with;
use hecvl::rng::digest_hex;
use serde_json::Value;
use tempfile::TempDir;

fn run(args: &[&str]) -> (ExitCode, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("hecvl").chain(args.iter().copied());
    let code = main_with(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, out, err) = run(args);
    assert_eq!(code, ExitCode::SUCCESS, "{args:?} failed: {err}");
    out
}

fn code(args: &[&str]) -> ExitCode {
    run(args).0
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

/// Small corpus plus prompts in a fresh directory.
fn small_corpus(videos: &str) -> TempDir {
    let dir = TempDir::new().unwrap();
    ok(&["generate", "--out", p(dir.path()), "--videos", videos]);
    dir
}

fn log_entries(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

#[test]
fn generate_prints_pair_counts() {
    let dir = TempDir::new().unwrap();
    let out = ok(&["generate", "--out", p(dir.path())]);
    // 40 videos × 6 phases × 4 clips
    let clips = 40 * 6 * 4;
    let phases = 40 * 6;
    assert_eq!(
        out,
        format!("clip pairs: {clips}\nphase pairs: {phases}\nvideo pairs: 40\n")
    );
    for f in ["corpus.jsonl", "prompts.json", "generate.manifest.json"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn generation_is_reproducible_and_seeded() {
    let digest = |seed: &str| {
        let dir = TempDir::new().unwrap();
        ok(&["generate", "--out", p(dir.path()), "--videos", "6", "--seed", seed]);
        digest_hex(&fs::read(dir.path().join("corpus.jsonl")).unwrap())
    };
    assert_eq!(digest("3"), digest("3"));
    assert_ne!(digest("3"), digest("4"));
}

#[test]
fn manifest_digests_match_outputs() {
    let dir = small_corpus("6");
    let m: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("generate.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(m["command"], "generate");
    assert_eq!(m["status"], "complete");
    assert_eq!(m["config"]["generator"]["videos"], 6);
    let outputs = m["outputs"].as_array().unwrap();
    assert_eq!(outputs.len(), 2);
    for o in outputs {
        let bytes = fs::read(o["path"].as_str().unwrap()).unwrap();
        assert_eq!(o["sha256"].as_str().unwrap(), digest_hex(&bytes));
    }
}

#[test]
fn missing_output_directory_is_io_error() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("nope");
    assert_eq!(code(&["generate", "--out", p(&missing)]), ExitCode::from(3));
}

#[test]
fn bad_config_is_config_error() {
    let dir = TempDir::new().unwrap();
    let unknown = write_config(dir.path(), "[generator]\nvidoes = 3\n");
    let (c, _, err) = run(&["generate", "--config", &unknown, "--out", p(dir.path())]);
    assert_eq!(c, ExitCode::from(2));
    assert!(err.contains("vidoes"), "{err}");

    let invalid = write_config(dir.path(), "[train]\nlr = -1.0\n");
    assert_eq!(
        code(&["generate", "--config", &invalid, "--out", p(dir.path())]),
        ExitCode::from(2)
    );
    assert_eq!(code(&["train", "--mode", "sideways"]), ExitCode::from(2));
}

#[test]
fn unit_cycle_train_log_has_three_entries() {
    let dir = small_corpus("8");
    let cfg = write_config(dir.path(), "[train]\nm = 1\nn = 1\nl = 1\ncycles = 1\n");
    let corpus = dir.path().join("corpus.jsonl");
    ok(&["train", "--config", &cfg, "--corpus", p(&corpus), "--out", p(dir.path()), "--mode", "hecvl"]);
    let log = log_entries(&dir.path().join("train_log.jsonl"));
    let levels: Vec<&str> = log.iter().map(|e| e["level"].as_str().unwrap()).collect();
    assert_eq!(levels, ["clip", "phase", "video"]);
    let first = fs::read_to_string(dir.path().join("train_log.jsonl")).unwrap();
    let order: Vec<usize> = ["\"batch\"", "\"level\"", "\"loss\"", "\"pos_sim\"", "\"neg_sim\""]
        .iter()
        .map(|k| first.lines().next().unwrap().find(k).unwrap())
        .collect();
    assert!(order.windows(2).all(|w| w[0] < w[1]), "{first}");
}

#[test]
fn single_mode_logs_only_single_batches() {
    let dir = small_corpus("8");
    let cfg = write_config(dir.path(), "[train]\nm = 2\nn = 1\nl = 1\ncycles = 2\n");
    let corpus = dir.path().join("corpus.jsonl");
    ok(&["train", "--config", &cfg, "--corpus", p(&corpus), "--out", p(dir.path()), "--mode", "single"]);
    let log = log_entries(&dir.path().join("train_log.jsonl"));
    assert_eq!(log.len(), 8);
    assert!(log.iter().all(|e| e["level"] == "single"));
}

#[test]
fn default_run_lowers_every_level_loss() {
    let dir = small_corpus("40");
    let corpus = dir.path().join("corpus.jsonl");
    ok(&["train", "--corpus", p(&corpus), "--out", p(dir.path())]);
    let log = log_entries(&dir.path().join("train_log.jsonl"));
    let period = 25 + 15 + 115;
    assert_eq!(log.len(), 50 * period);
    let mean = |cycle: usize, level: &str| {
        let xs: Vec<f64> = log[cycle * period..(cycle + 1) * period]
            .iter()
            .filter(|e| e["level"] == level)
            .map(|e| e["loss"].as_f64().unwrap())
            .collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    for level in ["clip", "phase", "video"] {
        assert!(mean(49, level) < mean(0, level), "{level} did not improve");
    }
    let checkpoints: Vec<_> = fs::read_dir(dir.path().join("checkpoints")).unwrap().collect();
    assert_eq!(checkpoints.len(), 4);
}

#[test]
fn insufficient_data_names_the_level() {
    let dir = small_corpus("8");
    let cfg = write_config(dir.path(), "[train]\nbatch_video = 7\n");
    let corpus = dir.path().join("corpus.jsonl");
    let (c, _, err) = run(&["train", "--config", &cfg, "--corpus", p(&corpus), "--out", p(dir.path())]);
    assert_eq!(c, ExitCode::from(4));
    assert!(err.contains("video"), "{err}");
}

#[test]
fn eval_is_repeatable_and_checks_compatibility() {
    let dir = small_corpus("8");
    let corpus = dir.path().join("corpus.jsonl");
    let prompts = dir.path().join("prompts.json");
    let ckpt = dir.path().join("checkpoint.hecv");
    ok(&["train", "--corpus", p(&corpus), "--out", p(dir.path()), "--cycles", "1"]);

    let eval = |out: &Path| {
        ok(&[
            "eval", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--prompts", p(&prompts),
            "--out", p(out),
        ]);
        fs::read(out.join("report.json")).unwrap()
    };
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let report = eval(a.path());
    assert_eq!(report, eval(b.path()));
    let r: Value = serde_json::from_slice(&report).unwrap();
    assert_eq!(r["f1_average"], "macro");
    assert_eq!(r["samples"], 2 * 6 * 4);
    let table = fs::read_to_string(a.path().join("report.txt")).unwrap();
    assert!(table.starts_with("Model"));
    assert!(table.contains("Top-1 Acc.") && table.contains("F1 Score"));

    let wide = TempDir::new().unwrap();
    let cfg = write_config(wide.path(), "[generator]\nd_in = 16\nvideos = 8\n");
    ok(&["generate", "--config", &cfg, "--out", p(wide.path())]);
    let (c, _, err) = run(&[
        "eval", "--checkpoint", p(&ckpt), "--corpus", p(&wide.path().join("corpus.jsonl")),
        "--prompts", p(&prompts), "--out", p(wide.path()),
    ]);
    assert_eq!(c, ExitCode::from(5), "{err}");
}

#[test]
fn eval_requires_prompt_coverage() {
    let dir = small_corpus("8");
    let corpus = dir.path().join("corpus.jsonl");
    let ckpt = dir.path().join("checkpoint.hecv");
    ok(&["train", "--corpus", p(&corpus), "--out", p(dir.path()), "--init-only"]);

    let full: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("prompts.json")).unwrap()).unwrap();
    let mut partial = full.clone();
    partial["classes"].as_array_mut().unwrap().retain(|c| c["label"] != 4);
    let path = dir.path().join("partial.json");
    fs::write(&path, partial.to_string()).unwrap();
    let (c, _, err) = run(&[
        "eval", "--checkpoint", p(&ckpt), "--corpus", p(&corpus), "--prompts", p(&path),
        "--out", p(dir.path()),
    ]);
    assert_eq!(c, ExitCode::from(4));
    assert!(err.contains("class 4"), "{err}");
}

#[test]
fn corrupted_checkpoint_is_data_error() {
    let dir = small_corpus("8");
    let corpus = dir.path().join("corpus.jsonl");
    let ckpt = dir.path().join("checkpoint.hecv");
    ok(&["train", "--corpus", p(&corpus), "--out", p(dir.path()), "--init-only"]);
    let mut bytes = fs::read(&ckpt).unwrap();
    let mid = bytes.len() / 2;
    bytes[mid] ^= 0x40;
    fs::write(&ckpt, bytes).unwrap();
    let (c, _, err) = run(&[
        "eval", "--checkpoint", p(&ckpt), "--corpus", p(&corpus),
        "--prompts", p(&dir.path().join("prompts.json")), "--out", p(dir.path()),
    ]);
    assert_eq!(c, ExitCode::from(4));
    assert!(err.contains("checksum"), "{err}");
}

#[test]
fn gradcheck_exit_codes() {
    let (c, out, _) = run(&["gradcheck", "--seed", "3"]);
    assert_eq!(c, ExitCode::SUCCESS);
    assert_eq!(out.lines().filter(|l| l.ends_with("pass")).count(), 4);

    let (c, _, err) = run(&["gradcheck", "--corrupt"]);
    assert_eq!(c, ExitCode::from(6));
    assert!(err.contains("gradient check failed"), "{err}");
}
