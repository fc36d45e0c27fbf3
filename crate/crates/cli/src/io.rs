use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use mrnn::corpus::{load_captions, load_splits, CaptionRecord, ImageFeatureStore, SplitKind, Vocabulary};
use mrnn::model::ModelParams;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{DataArgs, ModelArgs};

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn vocab_path(args: &ModelArgs) -> PathBuf {
    args.vocab.clone().unwrap_or_else(|| {
        args.model
            .parent()
            .map(|d| d.join("vocab.txt"))
            .unwrap_or_else(|| PathBuf::from("vocab.txt"))
    })
}

pub fn load_model(args: &ModelArgs) -> Result<(ModelParams, Vocabulary)> {
    let params =
        ModelParams::load(&args.model).with_context(|| format!("loading model {}", args.model.display()))?;
    let path = vocab_path(args);
    let file = fs::File::open(&path).with_context(|| format!("opening vocabulary {}", path.display()))?;
    let vocab = Vocabulary::read_from(BufReader::new(file))
        .with_context(|| format!("reading vocabulary {}", path.display()))?;
    anyhow::ensure!(
        vocab.len() == params.config().vocab_size,
        "vocabulary {} has {} entries but the model expects {}",
        path.display(),
        vocab.len(),
        params.config().vocab_size
    );
    Ok((params, vocab))
}

pub fn load_features(path: &Path) -> Result<ImageFeatureStore> {
    ImageFeatureStore::load(path).with_context(|| format!("loading features {}", path.display()))
}

pub struct Data {
    pub records: Vec<CaptionRecord>,
    pub splits: BTreeMap<String, SplitKind>,
    pub features: ImageFeatureStore,
}

pub fn load_data(args: &DataArgs) -> Result<Data> {
    let records =
        load_captions(&args.captions).with_context(|| format!("loading captions {}", args.captions.display()))?;
    let splits = load_splits(&args.splits).with_context(|| format!("loading splits {}", args.splits.display()))?;
    let features = load_features(&args.features)?;
    Ok(Data {
        records,
        splits,
        features,
    })
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.json` when `dir` is given.
pub fn write_metrics<T: Serialize>(dir: Option<&Path>, name: &str, csv: &str, json: &T) -> Result<()> {
    if let Some(dir) = dir {
        create_dir(dir)?;
        write_text(&dir.join(format!("{name}.csv")), csv)?;
        write_json(&dir.join(format!("{name}.json")), json)?;
    }
    Ok(())
}
