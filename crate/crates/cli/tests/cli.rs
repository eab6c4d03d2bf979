mod common;

use std::fs;

use common::{flag, small_fixture, stderr, stdout, write_fixture, zsh, zsh_env};
use tempfile::tempdir;
use zsh_core::codes::{load_codes, save_codes, BinaryCode, CodeDatabase};
use zsh_core::io::{load_features, load_model, FeatureFormat, LabelList};

fn train_args(f: &common::Files, model: &std::path::Path) -> Vec<String> {
    vec![
        "train".into(),
        flag("features", &f.train_features),
        flag("labels", &f.train_labels),
        flag("embeddings", &f.embeddings),
        flag("split", &f.split),
        flag("model", model),
        "--bits=16".into(),
        "--anchors=30".into(),
        "--iters=6".into(),
        "--seed=3".into(),
    ]
}

fn run(args: &[String]) -> std::process::Output {
    zsh(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn missing_embeddings_is_a_validation_error_naming_the_flag() {
    let dir = tempdir().unwrap();
    let f = write_fixture(dir.path(), &small_fixture());
    let out = zsh(&[
        "train",
        &flag("features", &f.train_features),
        &flag("labels", &f.train_labels),
        &flag("model", &dir.path().join("m.zsh")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--embeddings"), "{}", stderr(&out));
}

#[test]
fn flags_must_use_equals_and_unknown_flags_are_rejected() {
    let dir = tempdir().unwrap();
    let f = write_fixture(dir.path(), &small_fixture());
    let mut args = train_args(&f, &dir.path().join("m.zsh"));
    args.push("--frobnicate=1".into());
    assert_eq!(run(&args).status.code(), Some(2));

    let out = zsh(&["inspect", "--model", "m.zsh"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn bad_hyperparameter_names_its_flag() {
    let dir = tempdir().unwrap();
    let f = write_fixture(dir.path(), &small_fixture());
    let mut args = train_args(&f, &dir.path().join("m.zsh"));
    args.push("--alpha=0".into());
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--alpha"), "{}", stderr(&out));
}

#[test]
fn unseen_label_in_training_set_is_a_protocol_error() {
    let dir = tempdir().unwrap();
    let f = write_fixture(dir.path(), &small_fixture());
    let mut args = train_args(&f, &dir.path().join("m.zsh"));
    args[1] = flag("features", &f.features);
    args[2] = flag("labels", &f.labels);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
}

#[test]
fn train_encode_search_pipeline() {
    let dir = tempdir().unwrap();
    let fx = small_fixture();
    let f = write_fixture(dir.path(), &fx);
    let model = dir.path().join("m.zsh");
    let out = run(&train_args(&f, &model));
    assert!(out.status.success(), "{}", stderr(&out));

    // trace: header, iteration-0 row, then non-increasing objective
    let trace = fs::read_to_string(dir.path().join("m.zsh.trace.csv")).unwrap();
    let objectives: Vec<f64> = trace
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(objectives.len() >= 2);
    for w in objectives.windows(2) {
        assert!(w[1] <= w[0] + 1e-9 * (1.0 + w[0].abs()));
    }

    // same seed, same bytes
    let bytes = fs::read(&model).unwrap();
    let again = dir.path().join("m2.zsh");
    assert!(run(&train_args(&f, &again)).status.success());
    assert_eq!(fs::read(&again).unwrap(), bytes);

    let codes = dir.path().join("codes.bin");
    let out = zsh(&[
        "encode",
        &flag("model", &model),
        &flag("features", &f.features),
        &flag("labels", &f.labels),
        &flag("output", &codes),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let db = load_codes(&codes).unwrap();
    assert_eq!((db.bits(), db.len()), (16, 120));

    // offline recomputation of sign(Pᵀφ(x))
    let m = load_model(&model).unwrap();
    let x = load_features(&f.features, FeatureFormat::Csv).unwrap();
    let values = m.hash_values(x.values()).unwrap();
    for j in 0..db.len() {
        for i in 0..16 {
            assert_eq!(db.code(j).bit(i), values[(i, j)] >= 0.0);
        }
    }

    // querying the database with itself: each item is its own nearest neighbour
    let out = zsh(&["search", &flag("db", &codes), &flag("queries", &codes), "--k=7"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 7 * 120);
    for (q, chunk) in text.lines().collect::<Vec<_>>().chunks(7).enumerate() {
        let first: Vec<&str> = chunk[0].split(' ').collect();
        assert_eq!(first[0], db.ids()[q]);
        assert_eq!(first[2], "0");
    }

    let out = zsh(&["search", &flag("db", &codes), &flag("queries", &codes), "--k=7", "--exclude-self"]);
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 7 * 120);
    assert!(text.lines().all(|l| {
        let p: Vec<&str> = l.split(' ').collect();
        p[0] != p[1]
    }));

    let out = zsh(&[
        "search",
        &flag("db", &codes),
        &flag("query-features", &f.features),
        &flag("model", &model),
        "--k=7",
    ]);
    assert_eq!(stdout(&out), text_of_self_search(&codes));

    let out = zsh(&["inspect", &flag("model", &model)]);
    assert!(stdout(&out).contains("bits 16"));
    let out = zsh(&[
        "inspect",
        &flag("model", &model),
        &flag("features", &f.train_features),
        &flag("labels", &f.train_labels),
        &flag("embeddings", &f.embeddings),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).lines().any(|l| l.starts_with("objective ")));
}

fn text_of_self_search(codes: &std::path::Path) -> String {
    stdout(&zsh(&["search", &flag("db", codes), &flag("queries", codes), "--k=7"]))
}

#[test]
fn search_matches_full_sort_oracle() {
    let dir = tempdir().unwrap();
    let patterns: Vec<Vec<bool>> = (0..40u32).map(|v| (0..10).map(|b| (v * 37 + 11) >> b & 1 == 1).collect()).collect();
    let db = CodeDatabase::new(
        10,
        patterns.iter().map(|p| BinaryCode::pack(p)).collect(),
        (0..40).map(|j| format!("i{j}")).collect(),
        None,
    )
    .unwrap();
    let q = CodeDatabase::new(10, vec![BinaryCode::pack(&[true; 10])], vec!["q".into()], None).unwrap();
    let (dbp, qp) = (dir.path().join("db.bin"), dir.path().join("q.bin"));
    save_codes(&db, &dbp).unwrap();
    save_codes(&q, &qp).unwrap();

    let out = zsh(&["search", &flag("db", &dbp), &flag("queries", &qp), "--k=12"]);
    let mut oracle: Vec<(usize, usize)> = patterns
        .iter()
        .enumerate()
        .map(|(j, p)| (p.iter().filter(|b| !**b).count(), j))
        .collect();
    oracle.sort();
    let expected: String = oracle.iter().take(12).map(|(d, j)| format!("q i{j} {d}\n")).collect();
    assert_eq!(stdout(&out), expected);
}

#[test]
fn incompatible_code_lengths_are_rejected() {
    let dir = tempdir().unwrap();
    let db = CodeDatabase::new(8, vec![BinaryCode::pack(&[true; 8])], vec!["a".into()], None).unwrap();
    let q = CodeDatabase::new(9, vec![BinaryCode::pack(&[true; 9])], vec!["b".into()], None).unwrap();
    save_codes(&db, &dir.path().join("db.bin")).unwrap();
    save_codes(&q, &dir.path().join("q.bin")).unwrap();
    let out = zsh(&["search", &flag("db", &dir.path().join("db.bin")), &flag("queries", &dir.path().join("q.bin"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn empty_feature_file_fails_validation() {
    let dir = tempdir().unwrap();
    let f = write_fixture(dir.path(), &small_fixture());
    let model = dir.path().join("m.zsh");
    assert!(run(&train_args(&f, &model)).status.success());
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = zsh(&["encode", &flag("model", &model), &flag("features", &empty), &flag("output", &dir.path().join("c"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--features"));
}

#[test]
fn eval_on_handcrafted_database() {
    let dir = tempdir().unwrap();
    let codes: [&[bool]; 6] = [
        &[false, false, false],
        &[true, false, false],
        &[false, true, false],
        &[true, true, false],
        &[false, true, true],
        &[true, true, true],
    ];
    let labels = ["cat", "dog", "cat", "car", "cat", "dog"].map(String::from).to_vec();
    let db = CodeDatabase::new(
        3,
        codes.iter().map(|c| BinaryCode::pack(c)).collect(),
        (0..6).map(|j| j.to_string()).collect(),
        Some(LabelList::Single(labels)),
    )
    .unwrap();
    let q = CodeDatabase::new(
        3,
        vec![BinaryCode::pack(&[false; 3])],
        vec!["q".into()],
        Some(LabelList::Single(vec!["cat".into()])),
    )
    .unwrap();
    save_codes(&db, &dir.path().join("db.bin")).unwrap();
    save_codes(&q, &dir.path().join("q.bin")).unwrap();
    fs::write(dir.path().join("rel.tsv"), "cat\tdog\n").unwrap();

    let out = zsh(&[
        "eval",
        &flag("db", &dir.path().join("db.bin")),
        &flag("queries", &dir.path().join("q.bin")),
        &flag("related", &dir.path().join("rel.tsv")),
        "--k=4",
        "--radius=1",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let summary: serde_json::Value = serde_json::from_str(text.lines().last().unwrap()).unwrap();
    let get = |k: &str| summary[k].as_f64().unwrap();
    assert!((get("map_at_k") - 5.0 / 9.0).abs() < 1e-15);
    assert!((get("precision_at_radius") - 2.0 / 3.0).abs() < 1e-15);
    assert!((get("map_related") - (0.5 + 1.0 / 3.0 + 0.25) / 4.0).abs() < 1e-15);
    assert!((get("precision_related") - 1.0 / 3.0).abs() < 1e-15);
}

fn exp_args(f: &common::Files) -> Vec<String> {
    vec![
        "exp-zeroshot".into(),
        flag("features", &f.features),
        flag("labels", &f.labels),
        flag("embeddings", &f.embeddings),
        "--bits=16".into(),
        "--anchors=30".into(),
        "--iters=5".into(),
        "--num-queries=8".into(),
        "--k=40".into(),
        "--train-size=all".into(),
    ]
}

#[test]
fn seen_ratio_sweep_emits_three_rows() {
    let dir = tempdir().unwrap();
    let f = write_fixture(dir.path(), &small_fixture());
    let mut args = exp_args(&f);
    args.push("--sweep=seen-ratio".into());
    args.push("--grid=0.3,0.5,0.8".into());
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = stdout(&out);
    assert_eq!(csv.lines().next(), Some("x,map,precision"));
    assert_eq!(csv.lines().count(), 4);
}

#[test]
fn experiment_requires_split_and_honours_it() {
    let dir = tempdir().unwrap();
    let f = write_fixture(dir.path(), &small_fixture());
    let out = run(&exp_args(&f));
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--split"));

    let mut args = exp_args(&f);
    args.push(flag("split", &f.split));
    let out = run(&args);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out).lines().count(), 8 + 1);

    let no_unseen = dir.path().join("bad_split.txt");
    fs::write(&no_unseen, "[seen]\nc0\nc1\nc2\nc3\nc4\n[unseen]\n").unwrap();
    let mut args = exp_args(&f);
    args.push(flag("split", &no_unseen));
    assert_eq!(run(&args).status.code(), Some(4));
}

#[test]
fn workers_flag_and_env_fallback() {
    let dir = tempdir().unwrap();
    let f = write_fixture(dir.path(), &small_fixture());
    let model = dir.path().join("m.zsh");
    let mut args = train_args(&f, &model);
    args.push("--workers=0".into());
    let out = run(&args);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--workers"));

    let args = train_args(&f, &model);
    let argv: Vec<&str> = args.iter().map(String::as_str).collect();
    assert!(zsh_env(&argv, &[("ZSH_WORKERS", "2")]).status.success());
    assert_eq!(zsh_env(&argv, &[("ZSH_WORKERS", "zero")]).status.code(), Some(2));
}
