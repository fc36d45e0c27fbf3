//! Synthetic captioned-image corpus.
//!
//! Every image has latent attributes (topic, color, object, place). Its
//! feature vector is the concatenation of one-hot codes for those attributes,
//! perturbed by Gaussian noise, followed by `noise_dims` pure-noise
//! coordinates. Captions follow the template
//!
//! ```text
//! a <color> <object> <verb> <prep> the <place>
//! ```
//!
//! where the object and place come from the image's topic and color is the
//! image's color. Verb (drawn from the topic's verbs) and preposition are
//! re-drawn for every caption and are not encoded in the features.

use std::collections::BTreeMap;

use super::dataset::{assemble, CaptionRecord, DatasetSplit, SplitKind};
use super::features::ImageFeatureStore;
use super::vocab::Vocabulary;
use crate::error::{Error, Result};
use crate::numerics::{DenseVector, Rng};

struct Topic {
    objects: [&'static str; 4],
    verbs: [&'static str; 4],
    places: [&'static str; 4],
}

const TOPICS: [Topic; 4] = [
    Topic {
        objects: ["dog", "cat", "horse", "bird"],
        verbs: ["runs", "sleeps", "jumps", "eats"],
        places: ["park", "field", "garden", "barn"],
    },
    Topic {
        objects: ["car", "bus", "bike", "truck"],
        verbs: ["drives", "stops", "waits", "turns"],
        places: ["street", "bridge", "road", "tunnel"],
    },
    Topic {
        objects: ["man", "woman", "boy", "girl"],
        verbs: ["walks", "stands", "sits", "smiles"],
        places: ["beach", "room", "market", "station"],
    },
    Topic {
        objects: ["tree", "flower", "bush", "vine"],
        verbs: ["grows", "sways", "blooms", "rests"],
        places: ["forest", "hill", "valley", "meadow"],
    },
];

const COLORS: [&str; 6] = ["red", "blue", "green", "yellow", "white", "black"];
const PREPOSITIONS: [&str; 4] = ["in", "on", "near", "by"];
const SLOT_SIZE: usize = 4;

pub const MAX_TOPICS: usize = TOPICS.len();

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_images: usize,
    pub captions_per_image: usize,
    /// Number of topics used, at most [`MAX_TOPICS`].
    pub topics: usize,
    pub noise_dims: usize,
    /// Standard deviation of the noise added to the attribute codes.
    pub noise_std: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_images: 200,
            captions_per_image: 3,
            topics: MAX_TOPICS,
            noise_dims: 8,
            noise_std: 0.1,
            val_fraction: 0.2,
            test_fraction: 0.2,
        }
    }
}

impl SynthConfig {
    pub fn feature_dim(&self) -> usize {
        self.topics + COLORS.len() + 2 * SLOT_SIZE + self.noise_dims
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synthetic corpus: {m}")));
        if self.n_images == 0 {
            return bad("need at least 1 image");
        }
        if self.captions_per_image == 0 {
            return bad("captions_per_image must be positive");
        }
        if self.topics == 0 || self.topics > MAX_TOPICS {
            return bad("topics must be in 1..=4");
        }
        let ok_frac = |f: f64| (0.0..1.0).contains(&f);
        if !ok_frac(self.val_fraction)
            || !ok_frac(self.test_fraction)
            || self.val_fraction + self.test_fraction >= 1.0
        {
            return bad("val and test fractions must be in [0, 1) and sum below 1");
        }
        if self.noise_std.is_nan() || self.noise_std < 0.0 {
            return bad("noise_std must be non-negative");
        }
        Ok(())
    }
}

/// Latent attributes of one synthetic image.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Latent {
    pub topic: usize,
    pub color: usize,
    pub object: usize,
    pub place: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<CaptionRecord>,
    pub splits: BTreeMap<String, SplitKind>,
    pub features: ImageFeatureStore,
    /// Latent attributes keyed by image id.
    pub latents: BTreeMap<String, Latent>,
}

impl SyntheticCorpus {
    /// Vocabulary (from the training captions) and encoded splits.
    pub fn dataset(&self, min_count: usize) -> Result<(Vocabulary, DatasetSplit)> {
        assemble(&self.records, &self.splits, min_count)
    }
}

/// Words that belong to topic `t` (objects, verbs and places).
pub fn topic_words(t: usize) -> Vec<&'static str> {
    let topic = &TOPICS[t];
    topic
        .objects
        .iter()
        .chain(&topic.verbs)
        .chain(&topic.places)
        .copied()
        .collect()
}

pub fn image_id(i: usize) -> String {
    format!("img{i:05}")
}

pub fn generate_synthetic_corpus(rng: &mut Rng, cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let n_combos = cfg.topics * COLORS.len() * SLOT_SIZE * SLOT_SIZE;
    let mut combos: Vec<usize> = (0..n_combos).collect();
    rng.shuffle(&mut combos);

    let mut features = ImageFeatureStore::new(cfg.feature_dim());
    let mut latents = BTreeMap::new();
    let mut records = Vec::with_capacity(cfg.n_images * cfg.captions_per_image);
    for i in 0..cfg.n_images {
        let mut c = combos[i % n_combos];
        let place = c % SLOT_SIZE;
        c /= SLOT_SIZE;
        let object = c % SLOT_SIZE;
        c /= SLOT_SIZE;
        let color = c % COLORS.len();
        let topic = c / COLORS.len();
        let latent = Latent {
            topic,
            color,
            object,
            place,
        };

        let id = image_id(i);
        features.insert(id.clone(), feature_vector(rng, cfg, &latent))?;
        for _ in 0..cfg.captions_per_image {
            records.push(CaptionRecord {
                image_id: id.clone(),
                text: caption(rng, &latent),
            });
        }
        latents.insert(id, latent);
    }

    let mut order: Vec<usize> = (0..cfg.n_images).collect();
    rng.shuffle(&mut order);
    let n_test = (cfg.test_fraction * cfg.n_images as f64).round() as usize;
    let n_val = (cfg.val_fraction * cfg.n_images as f64).round() as usize;
    if n_test + n_val >= cfg.n_images {
        return Err(Error::InvalidConfig(
            "synthetic corpus: val and test fractions leave no training images".into(),
        ));
    }
    let mut splits = BTreeMap::new();
    for (rank, &i) in order.iter().enumerate() {
        let kind = if rank < n_test {
            SplitKind::Test
        } else if rank < n_test + n_val {
            SplitKind::Val
        } else {
            SplitKind::Train
        };
        splits.insert(image_id(i), kind);
    }
    if !splits.values().any(|k| *k == SplitKind::Train) {
        return Err(Error::InvalidConfig(
            "synthetic corpus: no training images left".into(),
        ));
    }

    Ok(SyntheticCorpus {
        records,
        splits,
        features,
        latents,
    })
}

fn feature_vector(rng: &mut Rng, cfg: &SynthConfig, latent: &Latent) -> DenseVector {
    let mut v = vec![0.0; cfg.feature_dim()];
    let color_at = cfg.topics;
    let object_at = color_at + COLORS.len();
    let place_at = object_at + SLOT_SIZE;
    let noise_at = place_at + SLOT_SIZE;
    v[latent.topic] = 1.0;
    v[color_at + latent.color] = 1.0;
    v[object_at + latent.object] = 1.0;
    v[place_at + latent.place] = 1.0;
    for x in &mut v[..noise_at] {
        *x += cfg.noise_std * rng.normal();
    }
    for x in &mut v[noise_at..] {
        *x = rng.normal();
    }
    // Stored as f32 on disk; round now so save/load is lossless.
    v.into_iter().map(|x| x as f32 as f64).collect()
}

fn caption(rng: &mut Rng, latent: &Latent) -> String {
    let topic = &TOPICS[latent.topic];
    format!(
        "a {} {} {} {} the {}",
        COLORS[latent.color],
        topic.objects[latent.object],
        topic.verbs[rng.below(SLOT_SIZE)],
        PREPOSITIONS[rng.below(PREPOSITIONS.len())],
        topic.places[latent.place],
    )
}
