use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use super::features::ImageFeatureStore;
use super::vocab::{Vocabulary, END_INDEX, START_INDEX};
use crate::error::{Error, Result};

/// One line of a caption file before tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionRecord {
    pub image_id: String,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SplitKind {
    Train,
    Val,
    Test,
}

impl FromStr for SplitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "train" => Ok(SplitKind::Train),
            "val" => Ok(SplitKind::Val),
            "test" => Ok(SplitKind::Test),
            other => Err(Error::InvalidConfig(format!("unknown split `{other}`"))),
        }
    }
}

impl fmt::Display for SplitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitKind::Train => "train",
            SplitKind::Val => "val",
            SplitKind::Test => "test",
        })
    }
}

/// An image id paired with the vocabulary indices of one caption.
///
/// `tokens` holds content words only; START and END are added by
/// [`CaptionedExample::framed`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaptionedExample {
    pub image_id: String,
    pub tokens: Vec<usize>,
    pub raw_text: String,
}

impl CaptionedExample {
    /// Number of predicted positions: the content words plus END.
    pub fn predicted_len(&self) -> usize {
        self.tokens.len() + 1
    }

    /// `(inputs, targets)` for teacher forcing: inputs start with START,
    /// targets end with END.
    pub fn framed(&self) -> (Vec<usize>, Vec<usize>) {
        frame(&self.tokens)
    }
}

pub fn frame(tokens: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut inputs = Vec::with_capacity(tokens.len() + 1);
    inputs.push(START_INDEX);
    inputs.extend_from_slice(tokens);
    let mut targets = tokens.to_vec();
    targets.push(END_INDEX);
    (inputs, targets)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetSplit {
    pub train: Vec<CaptionedExample>,
    pub val: Vec<CaptionedExample>,
    pub test: Vec<CaptionedExample>,
}

impl DatasetSplit {
    pub fn get(&self, kind: SplitKind) -> &[CaptionedExample] {
        match kind {
            SplitKind::Train => &self.train,
            SplitKind::Val => &self.val,
            SplitKind::Test => &self.test,
        }
    }

    fn get_mut(&mut self, kind: SplitKind) -> &mut Vec<CaptionedExample> {
        match kind {
            SplitKind::Train => &mut self.train,
            SplitKind::Val => &mut self.val,
            SplitKind::Test => &mut self.test,
        }
    }

    /// Check that every referenced image resolves in `features`.
    pub fn check_features(&self, features: &ImageFeatureStore) -> Result<()> {
        for ex in self.train.iter().chain(&self.val).chain(&self.test) {
            features.get(&ex.image_id)?;
        }
        Ok(())
    }
}

/// Build the vocabulary from the training captions and encode every split.
///
/// Each record's image must have a split assignment; an image therefore
/// never appears in two splits.
pub fn assemble(
    records: &[CaptionRecord],
    splits: &BTreeMap<String, SplitKind>,
    min_count: usize,
) -> Result<(Vocabulary, DatasetSplit)> {
    let mut train_text = Vec::new();
    for r in records {
        let kind = splits
            .get(&r.image_id)
            .ok_or_else(|| Error::InvalidConfig(format!("image `{}` has no split", r.image_id)))?;
        if *kind == SplitKind::Train {
            train_text.push(r.text.as_str());
        }
    }
    let vocab = Vocabulary::build(&train_text, min_count)?;
    let data = encode_splits(records, splits, &vocab)?;
    Ok((vocab, data))
}

/// Encode every record with an existing vocabulary (out-of-vocabulary
/// words become UNK).
pub fn encode_splits(
    records: &[CaptionRecord],
    splits: &BTreeMap<String, SplitKind>,
    vocab: &Vocabulary,
) -> Result<DatasetSplit> {
    let mut data = DatasetSplit::default();
    for r in records {
        let kind = *splits
            .get(&r.image_id)
            .ok_or_else(|| Error::InvalidConfig(format!("image `{}` has no split", r.image_id)))?;
        let tokens = vocab.encode(&r.text);
        if tokens.is_empty() {
            return Err(Error::InvalidConfig(format!(
                "empty caption for image `{}`",
                r.image_id
            )));
        }
        data.get_mut(kind).push(CaptionedExample {
            image_id: r.image_id.clone(),
            tokens,
            raw_text: r.text.clone(),
        });
    }
    Ok(data)
}

/// Group the examples of one split by image: `(image ids, caption indices per image)`.
pub fn group_by_image(examples: &[CaptionedExample]) -> (Vec<String>, Vec<Vec<usize>>) {
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, ex) in examples.iter().enumerate() {
        groups.entry(&ex.image_id).or_default().push(i);
    }
    let ids = groups.keys().map(|s| s.to_string()).collect();
    (ids, groups.into_values().collect())
}

pub fn read_captions<R: BufRead>(r: R) -> Result<Vec<CaptionRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: i + 1,
            message: "expected `image_id<TAB>caption`".into(),
        })?;
        out.push(CaptionRecord {
            image_id: id.to_owned(),
            text: text.to_owned(),
        });
    }
    if out.is_empty() {
        return Err(Error::EmptyInput("caption file"));
    }
    Ok(out)
}

pub fn write_captions<W: Write>(mut w: W, records: &[CaptionRecord]) -> Result<()> {
    for r in records {
        writeln!(w, "{}\t{}", r.image_id, r.text)?;
    }
    Ok(())
}

pub fn read_splits<R: BufRead>(r: R) -> Result<BTreeMap<String, SplitKind>> {
    let mut out = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let (id, kind) = line
            .split_once('\t')
            .ok_or_else(|| parse_err("expected `image_id<TAB>{train|val|test}`".into()))?;
        let kind = kind.parse().map_err(|e: Error| parse_err(e.to_string()))?;
        if let Some(prev) = out.insert(id.to_owned(), kind) {
            if prev != kind {
                return Err(parse_err(format!("image `{id}` assigned to two splits")));
            }
        }
    }
    Ok(out)
}

pub fn write_splits<W: Write>(mut w: W, splits: &BTreeMap<String, SplitKind>) -> Result<()> {
    for (id, kind) in splits {
        writeln!(w, "{id}\t{kind}")?;
    }
    Ok(())
}

pub fn load_captions(path: impl AsRef<Path>) -> Result<Vec<CaptionRecord>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_captions(BufReader::new(f))
}

pub fn load_splits(path: impl AsRef<Path>) -> Result<BTreeMap<String, SplitKind>> {
    let path = path.as_ref();
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_splits(BufReader::new(f))
}

/// Image ids of the examples, deduplicated and sorted.
pub fn image_ids(examples: &[CaptionedExample]) -> BTreeSet<&str> {
    examples.iter().map(|e| e.image_id.as_str()).collect()
}
