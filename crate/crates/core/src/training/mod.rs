//! Perplexity cost, mini-batch SGD with full BPTT, and the gradient-check
//! harness.
//!
//! The cost of a parameter set over `N` predicted words is
//!
//! ```text
//! C = (1/N) Σ_i Σ_t -log2 P(w_t | w_<t, I_i) + λ ‖θ‖²
//! ```
//!
//! where the regularizer covers weight matrices only.

mod gradcheck;

use std::io::Write;
use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

pub use gradcheck::{gradient_check, BlockError, GradCheckConfig, GradCheckReport, InstanceReport};

use crate::corpus::{CaptionedExample, DatasetSplit, ImageFeatureStore};
use crate::error::{Error, Result};
use crate::model::{accumulate_sentence, sentence_loss, BlockKind, Gradients, ModelConfig, ModelParams, Variant};
use crate::numerics::{DenseVector, InitScheme, Rng};

/// Sentences per parallel work unit. Fixed so that the reduction order, and
/// therefore every bit of the result, does not depend on the thread count.
const CHUNK: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Coefficient on the squared weight norm.
    pub lambda_reg: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
    /// Validation perplexity is computed every this many epochs (and after
    /// the last one). 0 disables it.
    pub eval_every: usize,
    pub variant: Variant,
    pub embed1_dim: usize,
    pub embed2_dim: usize,
    pub recurrent_dim: usize,
    pub multimodal_dim: usize,
    pub init: InitScheme,
    /// Where to write the final parameters, if anywhere.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            lambda_reg: 1e-5,
            batch_size: 16,
            epochs: 10,
            clip_norm: Some(5.0),
            seed: 0,
            eval_every: 1,
            variant: Variant::Multimodal,
            embed1_dim: ModelConfig::DEFAULT_EMBED_DIM,
            embed2_dim: ModelConfig::DEFAULT_EMBED_DIM,
            recurrent_dim: ModelConfig::DEFAULT_RECURRENT_DIM,
            multimodal_dim: ModelConfig::DEFAULT_MULTIMODAL_DIM,
            init: InitScheme::Xavier,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(self.lambda_reg >= 0.0 && self.lambda_reg.is_finite()) {
            return bad("lambda_reg must be finite and non-negative");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return bad("clip_norm must be positive");
            }
        }
        Ok(())
    }

    pub fn model_config(&self, vocab_size: usize, image_dim: usize) -> ModelConfig {
        ModelConfig::new(self.variant, vocab_size, image_dim).with_dims(
            self.embed1_dim,
            self.embed2_dim,
            self.recurrent_dim,
            self.multimodal_dim,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Full training-set cost after the epoch's updates.
    pub cost: f64,
    pub val_ppl: Option<f64>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub checkpoint: Option<PathBuf>,
}

impl TrainReport {
    pub fn final_cost(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.cost)
    }

    pub fn last_val_ppl(&self) -> Option<f64> {
        self.epochs.iter().rev().find_map(|e| e.val_ppl)
    }

    /// `epoch,cost,val_ppl,seconds`; a skipped validation leaves its cell empty.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "epoch,cost,val_ppl,seconds")?;
        for e in &self.epochs {
            let val = e.val_ppl.map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{},{:.3}", e.epoch, e.cost, val, e.seconds)?;
        }
        Ok(())
    }
}

fn resolve_images<'a>(examples: &[CaptionedExample], features: &'a ImageFeatureStore) -> Result<Vec<&'a DenseVector>> {
    examples.iter().map(|e| features.get(&e.image_id)).collect()
}

/// Summed `-log2 P` over every predicted position, and the number of those
/// positions.
pub fn corpus_log2_loss(
    params: &ModelParams,
    examples: &[CaptionedExample],
    features: &ImageFeatureStore,
) -> Result<(f64, usize)> {
    let images = resolve_images(examples, features)?;
    let losses: Vec<f64> = examples
        .par_iter()
        .zip(images.par_iter())
        .map(|(e, img)| sentence_loss(params, &e.tokens, img))
        .collect::<Result<_>>()?;
    let nats: f64 = losses.iter().sum();
    let words = examples.iter().map(CaptionedExample::predicted_len).sum();
    Ok((nats / std::f64::consts::LN_2, words))
}

/// Per-word average `-log2 P` over the dataset plus `lambda_reg · ‖θ‖²`.
pub fn cost(params: &ModelParams, examples: &[CaptionedExample], features: &ImageFeatureStore, lambda_reg: f64) -> Result<f64> {
    if examples.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let (bits, words) = corpus_log2_loss(params, examples, features)?;
    Ok(bits / words as f64 + lambda_reg * params.weight_norm_sq())
}

/// Gradient of the batch's data term (per-word average, log2 units) and
/// its summed natural-log loss.
pub fn batch_gradient(
    params: &ModelParams,
    examples: &[CaptionedExample],
    images: &[&DenseVector],
    batch: &[usize],
) -> Result<(Gradients, f64)> {
    let partials: Vec<(Gradients, f64)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = Gradients::zeros_like(params);
            let mut loss = 0.0;
            for &i in chunk {
                loss += accumulate_sentence(params, &examples[i].tokens, images[i], &mut g)?;
            }
            Ok((g, loss))
        })
        .collect::<Result<_>>()?;
    let mut iter = partials.into_iter();
    let (mut grads, mut loss) = iter.next().ok_or(Error::EmptyInput("batch"))?;
    for (g, l) in iter {
        grads.add_assign(&g);
        loss += l;
    }
    let words: usize = batch.iter().map(|&i| examples[i].predicted_len()).sum();
    grads.scale(1.0 / (std::f64::consts::LN_2 * words as f64));
    Ok((grads, loss))
}

/// Adds the regularizer gradient `2λθ` (weights only), clips the global
/// norm, and takes one SGD step. Returns the norm of the applied gradient.
pub fn apply_update(params: &mut ModelParams, grads: &mut Gradients, config: &TrainConfig) -> f64 {
    if config.lambda_reg > 0.0 {
        for (g, p) in grads.blocks_mut().into_iter().zip(params.blocks()) {
            if p.kind == BlockKind::Weight {
                for (gi, &pi) in g.data.iter_mut().zip(p.data) {
                    *gi += 2.0 * config.lambda_reg * pi;
                }
            }
        }
    }
    let mut norm = grads.norm();
    if let Some(clip) = config.clip_norm {
        if norm > clip {
            grads.scale(clip / norm);
            norm = grads.norm();
        }
    }
    let lr = config.learning_rate;
    for (p, g) in params.blocks_mut().into_iter().zip(grads.blocks()) {
        for (pi, &gi) in p.data.iter_mut().zip(g.data) {
            *pi -= lr * gi;
        }
    }
    norm
}

/// Initializes a model from `config.seed` and trains it.
pub fn train(
    config: &TrainConfig,
    vocab_size: usize,
    split: &DatasetSplit,
    features: &ImageFeatureStore,
) -> Result<(ModelParams, TrainReport)> {
    train_with_progress(config, vocab_size, split, features, |_| {})
}

pub fn train_with_progress(
    config: &TrainConfig,
    vocab_size: usize,
    split: &DatasetSplit,
    features: &ImageFeatureStore,
    on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    let mut init_rng = Rng::new(config.seed);
    let params = ModelParams::init(config.model_config(vocab_size, features.dim()), config.init, &mut init_rng)?;
    train_from(params, config, split, features, on_epoch)
}

/// Trains starting from `params`. The data order is shuffled each epoch
/// from a generator seeded by `config.seed`.
pub fn train_from(
    mut params: ModelParams,
    config: &TrainConfig,
    split: &DatasetSplit,
    features: &ImageFeatureStore,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<(ModelParams, TrainReport)> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptyInput("training split"));
    }
    let images = resolve_images(&split.train, features)?;
    resolve_images(&split.val, features)?;

    let mut order_rng = Rng::new(config.seed).fork();
    let mut order: Vec<usize> = (0..split.train.len()).collect();
    let mut report = TrainReport::default();

    for epoch in 1..=config.epochs {
        let start = Instant::now();
        order_rng.shuffle(&mut order);
        for batch in order.chunks(config.batch_size) {
            let (mut grads, loss) = batch_gradient(&params, &split.train, &images, batch)?;
            if !loss.is_finite() || !grads.is_finite() {
                return Err(Error::Diverged { epoch, cost: loss });
            }
            apply_update(&mut params, &mut grads, config);
        }
        let cost = cost(&params, &split.train, features, config.lambda_reg)?;
        if !cost.is_finite() || params.check_finite().is_err() {
            return Err(Error::Diverged { epoch, cost });
        }
        let due = config.eval_every > 0 && (epoch % config.eval_every == 0 || epoch == config.epochs);
        let val_ppl = if due && !split.val.is_empty() {
            let (bits, words) = corpus_log2_loss(&params, &split.val, features)?;
            Some((bits / words as f64).exp2())
        } else {
            None
        };
        let record = EpochRecord {
            epoch,
            cost,
            val_ppl,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        report.epochs.push(record);
    }

    if let Some(path) = &config.checkpoint {
        params.save(path)?;
        report.checkpoint = Some(path.clone());
    }
    Ok((params, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{frame, END_INDEX};

    fn example(id: &str, tokens: &[usize]) -> CaptionedExample {
        CaptionedExample {
            image_id: id.to_string(),
            tokens: tokens.to_vec(),
            raw_text: String::new(),
        }
    }

    fn store(ids: &[&str], dim: usize, seed: u64) -> ImageFeatureStore {
        let mut rng = Rng::new(seed);
        let mut s = ImageFeatureStore::new(dim);
        for id in ids {
            s.insert(*id, (0..dim).map(|_| rng.normal()).collect()).unwrap();
        }
        s
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            batch_size: 3,
            epochs: 3,
            embed1_dim: 4,
            embed2_dim: 4,
            recurrent_dim: 5,
            multimodal_dim: 6,
            ..TrainConfig::default()
        }
    }

    fn small_split() -> (DatasetSplit, ImageFeatureStore) {
        let train = vec![
            example("a", &[3, 4, 5]),
            example("b", &[6, 7]),
            example("a", &[5, 4]),
            example("c", &[3]),
            example("b", &[7, 7, 6, 5]),
            example("c", &[]),
            example("a", &[4, 6]),
        ];
        let val = vec![example("c", &[3, 5])];
        let split = DatasetSplit { train, val, test: vec![] };
        (split, store(&["a", "b", "c"], 3, 9))
    }

    #[test]
    fn uniform_model_cost_is_log2_vocab() {
        let cfg = ModelConfig::new(Variant::Multimodal, 8, 3).with_dims(2, 2, 2, 2);
        let p = ModelParams::zeros(cfg).unwrap();
        let data = vec![example("a", &[3, 4, 5])];
        let s = store(&["a"], 3, 1);
        assert!((cost(&p, &data, &s, 0.7).unwrap() - 3.0).abs() < 1e-12);
        let (bits, words) = corpus_log2_loss(&p, &data, &s).unwrap();
        assert_eq!(words, 4);
        assert!((bits - 12.0).abs() < 1e-12);
    }

    #[test]
    fn duplicating_dataset_keeps_data_term() {
        let (split, s) = small_split();
        let p = ModelParams::init(small_config().model_config(8, 3), InitScheme::Xavier, &mut Rng::new(2)).unwrap();
        let once = cost(&p, &split.train, &s, 0.0).unwrap();
        let twice: Vec<_> = split.train.iter().chain(&split.train).cloned().collect();
        assert!((cost(&p, &twice, &s, 0.0).unwrap() - once).abs() < 1e-12);
    }

    #[test]
    fn missing_feature_is_an_error() {
        let p = ModelParams::zeros(ModelConfig::new(Variant::Multimodal, 8, 3).with_dims(2, 2, 2, 2)).unwrap();
        let err = cost(&p, &[example("zzz", &[3])], &store(&["a"], 3, 1), 0.0).unwrap_err();
        assert!(matches!(err, Error::MissingFeature(_)));
    }

    #[test]
    fn zero_learning_rate_leaves_params_unchanged() {
        let (split, s) = small_split();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..small_config()
        };
        let p0 = ModelParams::init(cfg.model_config(8, 3), InitScheme::Xavier, &mut Rng::new(5)).unwrap();
        let (p1, report) = train_from(p0.clone(), &cfg, &split, &s, |_| {}).unwrap();
        assert_eq!(p0, p1);
        assert_eq!(report.epochs.len(), 3);
    }

    #[test]
    fn same_seed_gives_identical_checkpoint_bytes() {
        let (split, s) = small_split();
        let bytes = |seed| {
            let cfg = TrainConfig { seed, ..small_config() };
            let (p, _) = train(&cfg, 8, &split, &s).unwrap();
            let mut buf = Vec::new();
            p.write_to(&mut buf).unwrap();
            buf
        };
        assert_eq!(bytes(4), bytes(4));
        assert_ne!(bytes(4), bytes(5));
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let (split, s) = small_split();
        let cfg = small_config();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| train(&cfg, 8, &split, &s).unwrap())
        };
        let (a, ra) = run(1);
        let (b, rb) = run(6);
        assert_eq!(a, b);
        let costs = |r: &TrainReport| r.epochs.iter().map(|e| e.cost).collect::<Vec<_>>();
        assert_eq!(costs(&ra), costs(&rb));
    }

    #[test]
    fn regularizer_alone_shrinks_weights() {
        let cfg = TrainConfig {
            lambda_reg: 0.1,
            learning_rate: 0.5,
            ..small_config()
        };
        let mut p = ModelParams::init(cfg.model_config(8, 3), InitScheme::Xavier, &mut Rng::new(1)).unwrap();
        let before = p.weight_norm_sq();
        let mut g = Gradients::zeros_like(&p);
        apply_update(&mut p, &mut g, &cfg);
        let after = p.weight_norm_sq();
        assert!(after < before);
        // Pure decay: θ ← (1 - 2ηλ) θ.
        assert!((after - 0.81 * before).abs() < 1e-12 * before);
    }

    #[test]
    fn clipping_caps_applied_norm() {
        let cfg = TrainConfig {
            clip_norm: Some(0.25),
            ..small_config()
        };
        let mut p = ModelParams::init(cfg.model_config(8, 3), InitScheme::Xavier, &mut Rng::new(1)).unwrap();
        let mut g = Gradients::zeros_like(&p);
        for b in g.blocks_mut() {
            b.data.iter_mut().for_each(|x| *x = 3.0);
        }
        let norm = apply_update(&mut p, &mut g, &cfg);
        assert!(norm <= 0.25 + 1e-9);
        assert!(g.norm() <= 0.25 + 1e-9);
    }

    #[test]
    fn batch_gradient_is_per_word_average_in_bits() {
        let (split, s) = small_split();
        let images = resolve_images(&split.train, &s).unwrap();
        let p = ModelParams::init(small_config().model_config(8, 3), InitScheme::Xavier, &mut Rng::new(3)).unwrap();
        let (g, loss) = batch_gradient(&p, &split.train, &images, &[0, 1]).unwrap();
        let (g0, l0) = crate::model::sentence_gradients(&p, &split.train[0].tokens, images[0]).unwrap();
        let (g1, l1) = crate::model::sentence_gradients(&p, &split.train[1].tokens, images[1]).unwrap();
        assert!((loss - l0 - l1).abs() < 1e-12);
        let words = (frame(&[3, 4, 5]).1.len() + frame(&[6, 7]).1.len()) as f64;
        assert_eq!(frame(&[6, 7]).1.last(), Some(&END_INDEX));
        for ((a, b), c) in g.blocks().iter().zip(g0.blocks()).zip(g1.blocks()) {
            for ((x, y), z) in a.data.iter().zip(b.data).zip(c.data) {
                let expected = (y + z) / (std::f64::consts::LN_2 * words);
                assert!((x - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn non_finite_parameters_abort_training() {
        let (split, s) = small_split();
        let cfg = small_config();
        let mut p = ModelParams::init(cfg.model_config(8, 3), InitScheme::Xavier, &mut Rng::new(1)).unwrap();
        p.blocks_mut()[10].data[0] = f64::INFINITY;
        let err = train_from(p, &cfg, &split, &s, |_| {}).unwrap_err();
        assert!(matches!(err, Error::Diverged { epoch: 1, .. }));
    }

    #[test]
    fn invalid_configs_rejected() {
        for cfg in [
            TrainConfig { batch_size: 0, ..TrainConfig::default() },
            TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
            TrainConfig { lambda_reg: f64::NAN, ..TrainConfig::default() },
            TrainConfig { clip_norm: Some(0.0), ..TrainConfig::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn report_csv_layout() {
        let report = TrainReport {
            epochs: vec![
                EpochRecord { epoch: 1, cost: 2.5, val_ppl: None, seconds: 0.25 },
                EpochRecord { epoch: 2, cost: 2.0, val_ppl: Some(3.5), seconds: 0.5 },
            ],
            checkpoint: None,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "epoch,cost,val_ppl,seconds\n1,2.5,,0.250\n2,2,3.5,0.500\n"
        );
    }
}
