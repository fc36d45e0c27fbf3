#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn mrnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mrnn"))
        .args(args)
        .output()
        .expect("running the mrnn binary")
}

/// Runs the binary and panics with its stderr unless it succeeds.
pub fn ok(args: &[&str]) -> String {
    let out = mrnn(args);
    assert!(
        out.status.success(),
        "mrnn {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

pub struct Corpus {
    pub dir: PathBuf,
}

impl Corpus {
    pub fn captions(&self) -> PathBuf {
        self.dir.join("captions.tsv")
    }
    pub fn splits(&self) -> PathBuf {
        self.dir.join("splits.tsv")
    }
    pub fn features(&self) -> PathBuf {
        self.dir.join("features.mrnf")
    }
    /// `--captions … --splits … --features …`
    pub fn data_args(&self) -> Vec<String> {
        vec![
            "--captions".into(),
            s(&self.captions()).into(),
            "--splits".into(),
            s(&self.splits()).into(),
            "--features".into(),
            s(&self.features()).into(),
        ]
    }
}

pub fn synth(dir: &Path, images: usize, seed: u64) -> Corpus {
    let out = dir.join("data");
    ok(&[
        "synth",
        "--out",
        s(&out),
        "--images",
        &images.to_string(),
        "--seed",
        &seed.to_string(),
    ]);
    Corpus { dir: out }
}

pub const SMALL_CONFIG: &str = "\
embed1_dim = 16
embed2_dim = 16
recurrent_dim = 32
multimodal_dim = 32
learning_rate = 0.1
batch_size = 8
epochs = 3
";

pub fn write_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL_CONFIG).unwrap();
    path
}

/// Trains a small model into `out`; extra flags are appended.
pub fn train(corpus: &Corpus, config: &Path, out: &Path, extra: &[&str]) -> String {
    let mut args: Vec<String> = vec!["train".into(), "--quiet".into()];
    args.extend(corpus.data_args());
    args.extend(["--config".into(), s(config).into(), "--out".into(), s(out).into()]);
    args.extend(extra.iter().map(|a| a.to_string()));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&refs)
}
