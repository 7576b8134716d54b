use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ctccrf::io::{encode_matrix, read_matrix};
use ctccrf::Matrix;

fn ctccrf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ctccrf"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = ctccrf(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn prepare_set(dir: &Path, set: &str) {
    ok(
        dir,
        &[
            "prepare", "--alphabet", "toy/alphabet.txt", "--labels", &format!("toy/{set}/labels.txt"),
            "--features", &format!("toy/{set}/feats.scp"), "--work", "W", "--set", set,
        ],
    );
}

/// synth, LM, prepare and graphs; no training.
fn staged(dir: &Path, extra_synth: &[&str]) {
    let mut synth = vec!["synth", "--dir", "toy"];
    synth.extend_from_slice(extra_synth);
    ok(dir, &synth);
    ok(
        dir,
        &["lm-train", "--corpus", "toy/corpus.txt", "--alphabet", "toy/alphabet.txt", "--order", "2", "--out", "W/lm/den.arpa"],
    );
    prepare_set(dir, "train");
    prepare_set(dir, "test");
    ok(dir, &["build-graphs", "--work", "W"]);
}

fn error_rate(report: &str) -> f64 {
    let pct = report
        .strip_prefix("error rate ")
        .and_then(|r| r.split('%').next())
        .expect("report format");
    pct.parse().unwrap()
}

fn score(dir: &Path) -> f64 {
    let out = ok(dir, &["score", "--hyp", "W/decode/test.hyp", "--ref", "toy/test/labels.txt"]);
    error_rate(&String::from_utf8_lossy(&out.stdout))
}

fn skipped_percent(decode_stderr: &str) -> f64 {
    let summary = decode_stderr.lines().last().unwrap();
    let field = summary.split(", ").find(|f| f.ends_with("skipped")).unwrap();
    field.trim_end_matches("% skipped").parse().unwrap()
}

#[test]
fn toy_pipeline_trains_and_decodes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    staged(dir, &[]);
    ok(dir, &["train", "--work", "W", "--heldout-set", "test", "--epochs", "15"]);
    let metrics = fs::read_to_string(dir.join("W/model/metrics.tsv")).unwrap();
    assert_eq!(metrics.lines().count(), 16);
    assert!(dir.join("W/model/epoch-015.ckpt").is_file());

    let skip = ok(dir, &["decode", "--work", "W", "--blank-skip", "0.7"]);
    let with_skip = score(dir);
    let skip_hyp = fs::read(dir.join("W/decode/test.hyp")).unwrap();
    let no_skip = ok(dir, &["decode", "--work", "W", "--no-blank-skip"]);
    let without_skip = score(dir);
    assert!(with_skip <= 5.0, "token error {with_skip}%");
    assert_eq!(with_skip, without_skip);
    assert!(skipped_percent(&stderr(&skip)) > 0.0);
    assert_eq!(skipped_percent(&stderr(&no_skip)), 0.0);
    assert_eq!(skip_hyp, fs::read(dir.join("W/decode/test.hyp")).unwrap());

    ok(dir, &["decode", "--work", "W", "--greedy"]);
    assert!(score(dir) <= 5.0);
}

fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn rerunning_the_pipeline_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let run = || {
        staged(dir, &["--train-size", "20", "--test-size", "5"]);
        ok(dir, &["--workers", "2", "train", "--work", "W", "--epochs", "2"]);
        ok(dir, &["decode", "--work", "W"]);
        snapshot(dir)
    };
    let first = run();
    let second = run();
    assert_eq!(first.len(), second.len());
    for (a, b) in first.iter().zip(&second) {
        assert_eq!(a, b, "{} differs", a.0.display());
    }
    assert!(!first.iter().any(|(p, _)| p.extension().is_some_and(|e| e == "tmp")));
}

#[test]
fn config_file_supplies_flags_and_command_line_wins() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    staged(dir, &["--train-size", "10", "--test-size", "3"]);
    // keys for other subcommands are ignored
    fs::write(dir.join("run.conf"), "work = W\nepochs = 1\nbeam = 0\nheldout_set = test\n").unwrap();
    ok(dir, &["train", "--config", "run.conf"]);
    assert_eq!(fs::read_to_string(dir.join("W/model/metrics.tsv")).unwrap().lines().count(), 2);
    let bad = ctccrf(dir, &["decode", "--config", "run.conf"]);
    assert_eq!(code(&bad), 1, "{}", stderr(&bad));
    ok(dir, &["decode", "--config", "run.conf", "--beam", "8"]);

    fs::write(dir.join("typo.conf"), "wrok = W\n").unwrap();
    let out = ctccrf(dir, &["decode", "--config", "typo.conf", "--work", "W"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("wrok"));
}

#[test]
fn oov_label_names_the_utterance() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    staged(dir, &["--train-size", "4", "--test-size", "2"]);
    let labels = fs::read_to_string(dir.join("toy/train/labels.txt")).unwrap();
    let first_id = labels.lines().next().unwrap().split('\t').next().unwrap().to_string();
    let broken = labels.replacen('\t', "\tzz ", 1);
    fs::write(dir.join("toy/train/labels.txt"), broken).unwrap();
    let out = ctccrf(
        dir,
        &["prepare", "--alphabet", "toy/alphabet.txt", "--labels", "toy/train/labels.txt", "--features", "toy/train/feats.scp", "--work", "W2", "--den-lm", "W/lm/den.arpa"],
    );
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains(&first_id) && msg.contains("zz"), "{msg}");
}

#[test]
fn missing_arpa_fails_before_writing() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    ok(dir, &["synth", "--dir", "toy", "--train-size", "3", "--test-size", "1"]);
    let out = ctccrf(
        dir,
        &["prepare", "--alphabet", "toy/alphabet.txt", "--labels", "toy/train/labels.txt", "--features", "toy/train/feats.scp", "--work", "W", "--den-lm", "nope.arpa"],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope.arpa"));
    let out = ctccrf(dir, &["build-graphs", "--work", "W", "--alphabet", "toy/alphabet.txt", "--den-lm", "nope.arpa"]);
    assert_eq!(code(&out), 2);
    assert!(!dir.join("W").exists());
}

#[test]
fn score_rejects_mismatched_lists() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("ref"), "a\tx y\nb\tz\n").unwrap();
    fs::write(dir.join("hyp"), "a\tx y\n").unwrap();
    assert_eq!(code(&ctccrf(dir, &["score", "--hyp", "hyp", "--ref", "ref"])), 2);
    fs::write(dir.join("hyp"), "a\tx y\nc\tz\n").unwrap();
    assert_eq!(code(&ctccrf(dir, &["score", "--hyp", "hyp", "--ref", "ref"])), 2);
    fs::write(dir.join("hyp"), "b\tz q\na\tx\n").unwrap();
    let out = ok(dir, &["score", "--hyp", "hyp", "--ref", "ref", "--report", "r.txt"]);
    let text = String::from_utf8_lossy(&out.stdout);
    // 2 errors over 3 reference tokens
    assert_eq!(error_rate(&text), 66.67);
    assert!(text.contains("deletions=1") && text.contains("insertions=1"));
    assert_eq!(fs::read_to_string(dir.join("r.txt")).unwrap(), text);
}

#[test]
fn gradcheck_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let out = ok(dir, &["gradcheck"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("PASS"));
    let reports: Vec<String> = ["1", "2"]
        .iter()
        .map(|seed| {
            let out = ok(dir, &["gradcheck", "--trials", "20", "--seed", seed]);
            String::from_utf8_lossy(&out.stdout).into_owned()
        })
        .collect();
    assert!(reports.iter().all(|r| r.starts_with("PASS")));
    assert_ne!(reports[0], reports[1]);
    let out = ctccrf(dir, &["gradcheck", "--trials", "5", "--tolerance", "1e-12"]);
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("FAIL"));
}

#[test]
fn two_label_topology_has_three_states() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("alphabet.txt"), "a\nb\n").unwrap();
    fs::write(dir.join("corpus.txt"), "a b\nb a a\n").unwrap();
    ok(dir, &["lm-train", "--corpus", "corpus.txt", "--alphabet", "alphabet.txt", "--order", "2", "--out", "den.arpa"]);
    ok(dir, &["build-graphs", "--work", "W", "--alphabet", "alphabet.txt", "--den-lm", "den.arpa"]);
    let t = fs::read_to_string(dir.join("W/graphs/T.fst")).unwrap();
    let arcs = t.lines().filter(|l| l.split('\t').count() == 5).count();
    let finals = t.lines().filter(|l| l.split('\t').count() == 2).count();
    let states: std::collections::BTreeSet<&str> =
        t.lines().flat_map(|l| l.split('\t').take(2)).collect();
    assert_eq!(arcs, 9);
    assert_eq!(finals, 3);
    assert_eq!(states.len(), 3);
}

#[test]
fn prepare_subsamples_and_writes_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fs::write(dir.join("alphabet.txt"), "a\nb\n").unwrap();
    fs::write(dir.join("corpus.txt"), "a b\nb a\na\n").unwrap();
    ok(dir, &["lm-train", "--corpus", "corpus.txt", "--alphabet", "alphabet.txt", "--order", "2", "--out", "den.arpa"]);
    fs::create_dir(dir.join("f")).unwrap();
    let mut scp = String::new();
    for (i, frames) in [10usize, 7, 12].iter().enumerate() {
        let m = Matrix::from_vec(*frames, 2, (0..frames * 2).map(|v| v as f64).collect()).unwrap();
        fs::write(dir.join(format!("f/u{i}.catm")), encode_matrix(&m)).unwrap();
        scp += &format!("u{i}\tf/u{i}.catm\n");
    }
    fs::write(dir.join("feats.scp"), scp).unwrap();
    fs::write(dir.join("labels.txt"), "u0\ta b\nu1\tb a\nu2\ta\n").unwrap();
    ok(
        dir,
        &["prepare", "--alphabet", "alphabet.txt", "--labels", "labels.txt", "--features", "feats.scp", "--work", "W", "--den-lm", "den.arpa", "--subsample", "3"],
    );
    let manifest = fs::read_to_string(dir.join("W/data/train/manifest.tsv")).unwrap();
    let rows: Vec<Vec<&str>> = manifest.lines().skip(1).map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0][..3], ["u0", "4", "2"]);
    assert_eq!(rows[1][1], "3");
    assert_eq!(rows[2][4], "a");
    let m = read_matrix(&dir.join("W/data/train/feats/u0.catm")).unwrap();
    assert_eq!(m.rows(), 4);
    assert_eq!(m.row(1), &[6.0, 7.0]);
    let cache = fs::read_to_string(dir.join("W/data/train/log_pl.txt")).unwrap();
    assert_eq!(cache.lines().count(), 3);
    assert!(!dir.join("W/data/.train.staging").exists());

    // a failed re-prepare leaves the previous set untouched
    fs::write(dir.join("labels.txt"), "u0\ta b\nu1\tb q\nu2\ta\n").unwrap();
    let out = ctccrf(
        dir,
        &["prepare", "--alphabet", "alphabet.txt", "--labels", "labels.txt", "--features", "feats.scp", "--work", "W", "--den-lm", "den.arpa"],
    );
    assert_eq!(code(&out), 2);
    assert_eq!(fs::read_to_string(dir.join("W/data/train/manifest.tsv")).unwrap(), manifest);
}
