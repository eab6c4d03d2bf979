#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use zsh_core::io::{format_embeddings, format_labels, format_split, save_features, FeatureFormat};
use zsh_core::synth::{zeroshot_fixture, UnseenPlacement, ZeroShotFixture};

pub fn zsh(args: &[&str]) -> Output {
    zsh_env(args, &[])
}

pub fn zsh_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_zsh"));
    cmd.args(args).env_remove("ZSH_WORKERS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn flag(name: &str, path: &Path) -> String {
    format!("--{name}={}", path.display())
}

/// Paths of a fixture written to disk: every item, plus the seen-only training subset.
pub struct Files {
    pub features: PathBuf,
    pub labels: PathBuf,
    pub train_features: PathBuf,
    pub train_labels: PathBuf,
    pub embeddings: PathBuf,
    pub split: PathBuf,
}

pub fn small_fixture() -> ZeroShotFixture {
    zeroshot_fixture(UnseenPlacement::Related, 20, 8, 3.0, 0.3, 4).unwrap()
}

pub fn write_fixture(dir: &Path, fx: &ZeroShotFixture) -> Files {
    let files = Files {
        features: dir.join("all.csv"),
        labels: dir.join("all.labels"),
        train_features: dir.join("train.csv"),
        train_labels: dir.join("train.labels"),
        embeddings: dir.join("emb.txt"),
        split: dir.join("split.txt"),
    };
    let data = &fx.data;
    save_features(&data.features, &files.features, FeatureFormat::Csv).unwrap();
    std::fs::write(&files.labels, format_labels(&data.labels)).unwrap();
    let names = data.labels.single().unwrap();
    let seen: Vec<usize> = (0..names.len()).filter(|&j| fx.split.is_seen(&names[j])).collect();
    save_features(&data.features.select(&seen).unwrap(), &files.train_features, FeatureFormat::Csv).unwrap();
    std::fs::write(&files.train_labels, format_labels(&data.labels.select(&seen))).unwrap();
    std::fs::write(&files.embeddings, format_embeddings(&data.table)).unwrap();
    std::fs::write(&files.split, format_split(&fx.split)).unwrap();
    files
}
