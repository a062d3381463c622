use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gazeprobe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazeprobe"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = gazeprobe(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn demo() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--dir", "d", "--sentences", "100", "--seed", "4"]);
    dir
}

#[test]
fn profile_writes_one_row_per_sentence() {
    let dir = demo();
    ok(dir.path(), &["profile", "--conllu", "d/xx.conllu", "--lexicon", "d/xx.lexicon.tsv", "-o", "p.csv"]);
    let csv = fs::read_to_string(dir.path().join("p.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sentence_id,language,sentence_length,avg_word_length,avg_word_frequency,\
         n_low_frequency_words,lexical_density,parse_tree_depth,avg_dep_link_length,\
         max_dep_link_length,n_verbal_heads"
    );
    assert_eq!(lines.count(), 100);
}

#[test]
fn full_chain() {
    let dir = demo();
    let d = dir.path();
    ok(d, &["profile", "--conllu", "d/xx.conllu", "--lexicon", "d/xx.lexicon.tsv", "-o", "p.csv"]);
    ok(d, &["gaze-aggregate", "--metrics", "d/xx.metrics.csv", "-o", "m.csv", "--scaler", "s.json"]);
    let scaler: serde_json::Value = serde_json::from_slice(&fs::read(d.join("s.json")).unwrap()).unwrap();
    assert!(scaler["min"]["TFD"].is_number());

    ok(d, &["train-svr", "--profiles", "p.csv", "--metrics", "m.csv", "--group", "length", "-o", "svr.json", "--log", "svr.csv"]);
    let svr: serde_json::Value = serde_json::from_slice(&fs::read(d.join("svr.json")).unwrap()).unwrap();
    assert_eq!(svr["models"].as_array().unwrap().len(), 4);
    assert_eq!(svr["features"], serde_json::json!(["sentence_length", "avg_word_length"]));
    assert!(fs::read_to_string(d.join("svr.csv")).unwrap().starts_with("metric,epoch,dual_objective"));

    ok(d, &["train-head", "--embeddings", "d/xx.emb.tsv", "--metrics", "m.csv", "-o", "head.json", "--log", "head.csv"]);
    assert!(fs::read_to_string(d.join("head.csv")).unwrap().starts_with("step,epoch,train_loss,val_loss\n0,0,"));

    ok(d, &["evaluate", "--metrics", "m.csv", "--profiles", "p.csv", "--folds", "4", "-o", "ev.csv", "--correlations", "c.csv"]);
    assert_eq!(fs::read_to_string(d.join("ev.csv")).unwrap().lines().count(), 1 + 4 * 4);
    assert_eq!(fs::read_to_string(d.join("c.csv")).unwrap().lines().count(), 10);

    ok(d, &["baseline", "--metrics", "m.csv", "--profiles", "p.csv", "--seeds", "2", "-o", "b.csv"]);
    assert_eq!(fs::read_to_string(d.join("b.csv")).unwrap().lines().count(), 1 + 2 * 4);

    ok(d, &[
        "probe", "--pretrained", "d/xx.pre.tsv", "--finetuned", "d/xx.ft.tsv", "--profiles", "p.csv",
        "--train-size", "80", "--test-size", "20", "-o", "probe.csv",
    ]);
    let probe = fs::read_to_string(d.join("probe.csv")).unwrap();
    assert!(probe.starts_with("feature,r2_pre,r2_ft,delta,language\n"));
}

#[test]
fn scramble_is_deterministic_and_needs_a_seed() {
    let dir = demo();
    let d = dir.path();
    ok(d, &["scramble", "--input", "d/xx.conllu", "--seed", "9", "-o", "a.txt"]);
    ok(d, &["scramble", "--input", "d/xx.conllu", "--seed", "9", "-o", "b.txt"]);
    assert_eq!(fs::read(d.join("a.txt")).unwrap(), fs::read(d.join("b.txt")).unwrap());
    assert_eq!(gazeprobe(d, &["scramble", "--input", "d/xx.conllu", "-o", "c.txt"]).status.code(), Some(1));

    // Plain text input goes through the same path.
    ok(d, &["scramble", "--input", "a.txt", "--seed", "2", "-o", "again.txt"]);
    assert_eq!(fs::read_to_string(d.join("again.txt")).unwrap().lines().count(), 100);
}

#[test]
fn run_writes_a_bundle() {
    let dir = demo();
    fs::write(
        dir.path().join("exp.cfg"),
        "pipeline = svr\nlanguages = xx\noutput = out\nfolds = 4\n\
         xx.conllu = d/xx.conllu\nxx.lexicon = d/xx.lexicon.tsv\nxx.metrics = d/xx.metrics.csv\n",
    )
    .unwrap();
    ok(dir.path(), &["run", "exp.cfg"]);
    assert!(dir.path().join("out/manifest.json").is_file());
    assert!(dir.path().join("out/svr_subsets.csv").is_file());
}

#[test]
fn exit_codes() {
    let dir = demo();
    let d = dir.path();
    let code = |args: &[&str]| gazeprobe(d, args).status.code();
    assert_eq!(code(&["--help"]), Some(0));
    assert_eq!(code(&["profile", "--bogus"]), Some(1));
    assert_eq!(code(&["profile", "--conllu", "missing.conllu", "--lexicon", "d/xx.lexicon.tsv", "-o", "p.csv"]), Some(1));

    fs::write(d.join("bad.conllu"), "1\tonly\tthree\n").unwrap();
    assert_eq!(code(&["profile", "--conllu", "bad.conllu", "--lexicon", "d/xx.lexicon.tsv", "-o", "p.csv"]), Some(1));

    fs::write(d.join("bad.cfg"), "pipeline = svr\nlanguages = xx\noutput = out\n").unwrap();
    let out = gazeprobe(d, &["run", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("xx.conllu"));

    // Writing into a directory that does not exist is an environment failure.
    assert_eq!(
        code(&["profile", "--conllu", "d/xx.conllu", "--lexicon", "d/xx.lexicon.tsv", "-o", "no/such/dir/p.csv"]),
        Some(2)
    );
}
