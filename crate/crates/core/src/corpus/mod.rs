//! Vocabulary, caption and feature ingestion, dataset splits, and the
//! synthetic corpus generator.

mod dataset;
mod features;
mod synthetic;
mod vocab;

pub use dataset::{
    assemble, encode_splits, frame, group_by_image, image_ids, load_captions, load_splits, read_captions,
    read_splits, write_captions, write_splits, CaptionRecord, CaptionedExample, DatasetSplit,
    SplitKind,
};
pub use features::{ImageFeatureStore, FEATURE_MAGIC, FEATURE_VERSION};
pub use synthetic::{
    generate_synthetic_corpus, image_id, topic_words, Latent, SynthConfig, SyntheticCorpus,
    MAX_TOPICS,
};
pub use vocab::{
    tokenize, Vocabulary, END_INDEX, END_TOKEN, START_INDEX, START_TOKEN, UNK_INDEX, UNK_TOKEN,
};

/// Free-function form of [`Vocabulary::build`].
pub fn build_vocabulary<S: AsRef<str>>(captions: &[S], min_count: usize) -> crate::Result<Vocabulary> {
    Vocabulary::build(captions, min_count)
}

/// Free-function form of [`ImageFeatureStore::load`].
pub fn load_features(path: impl AsRef<std::path::Path>) -> crate::Result<ImageFeatureStore> {
    ImageFeatureStore::load(path)
}
