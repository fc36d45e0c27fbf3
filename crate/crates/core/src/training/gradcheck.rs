//! Analytic-vs-numeric gradient comparison on random tiny models.

use crate::corpus::UNK_INDEX;
use crate::error::{Error, Result};
use crate::model::{forward_sentence, sentence_gradients, sentence_loss, ModelConfig, ModelParams, Variant, Weights};
use crate::numerics::{DenseVector, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckConfig {
    pub samples: usize,
    pub seed: u64,
    pub variant: Variant,
    pub vocab_size: usize,
    pub embed1_dim: usize,
    pub embed2_dim: usize,
    pub recurrent_dim: usize,
    pub multimodal_dim: usize,
    pub image_dim: usize,
    /// Content tokens per sentence (END adds one more prediction).
    pub sentence_len: usize,
    /// Parameters are drawn from `U(-init_range, init_range)`.
    pub init_range: f64,
    pub step: f64,
    pub tolerance: f64,
    /// Smallest denominator in the relative error.
    pub floor: f64,
    /// Resample an instance while any ReLU pre-activation is closer than
    /// this to zero, where central differences straddle the kink.
    pub kink_margin: f64,
    /// Negative control: distort the analytic gradient of this block.
    pub corrupt_block: Option<String>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            samples: 20,
            seed: 0,
            variant: Variant::Multimodal,
            vocab_size: 11,
            embed1_dim: 4,
            embed2_dim: 4,
            recurrent_dim: 6,
            multimodal_dim: 8,
            image_dim: 5,
            sentence_len: 5,
            init_range: 0.5,
            step: 1e-5,
            tolerance: 1e-4,
            floor: 1e-6,
            kink_margin: 1e-3,
            corrupt_block: None,
        }
    }
}

impl GradCheckConfig {
    fn model_config(&self) -> ModelConfig {
        ModelConfig::new(self.variant, self.vocab_size, self.image_dim).with_dims(
            self.embed1_dim,
            self.embed2_dim,
            self.recurrent_dim,
            self.multimodal_dim,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockError {
    pub block: &'static str,
    /// Largest relative error over the block's entries.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceReport {
    pub tokens: Vec<usize>,
    /// Draws rejected by the kink guard before this instance.
    pub resamples: usize,
    pub blocks: Vec<BlockError>,
}

impl InstanceReport {
    pub fn max_rel_error(&self) -> f64 {
        self.blocks.iter().map(|b| b.max_rel_error).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub instances: Vec<InstanceReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.instances.iter().map(InstanceReport::max_rel_error).fold(0.0, f64::max)
    }

    /// Instance index and block holding the largest error.
    pub fn worst(&self) -> Option<(usize, &BlockError)> {
        self.instances
            .iter()
            .enumerate()
            .flat_map(|(i, inst)| inst.blocks.iter().map(move |b| (i, b)))
            .max_by(|a, b| a.1.max_rel_error.total_cmp(&b.1.max_rel_error))
    }

    pub fn passed(&self) -> bool {
        !self.instances.is_empty() && self.max_rel_error() < self.tolerance
    }
}

/// Compares backpropagated gradients with central differences on
/// `config.samples` random models and sentences.
pub fn gradient_check(config: &GradCheckConfig) -> Result<GradCheckReport> {
    if config.samples == 0 {
        return Err(Error::InvalidConfig("gradient check needs at least one sample".into()));
    }
    if config.vocab_size <= UNK_INDEX + 1 {
        return Err(Error::InvalidConfig("gradient check vocabulary too small".into()));
    }
    if let Some(name) = &config.corrupt_block {
        let p = ModelParams::zeros(config.model_config())?;
        if !p.blocks().iter().any(|b| b.name == name) {
            return Err(Error::InvalidConfig(format!("no parameter block named `{name}`")));
        }
    }
    let mut rng = Rng::new(config.seed);
    let mut instances = Vec::with_capacity(config.samples);
    for _ in 0..config.samples {
        let mut resamples = 0;
        loop {
            let (params, tokens, image) = draw_instance(config, &mut rng)?;
            if min_relu_margin(&params, &tokens, &image)? < config.kink_margin {
                resamples += 1;
                if resamples > 1000 {
                    return Err(Error::InvalidConfig("kink guard rejected every draw".into()));
                }
                continue;
            }
            let blocks = check_instance(&params, &tokens, &image, config)?;
            instances.push(InstanceReport { tokens, resamples, blocks });
            break;
        }
    }
    Ok(GradCheckReport {
        instances,
        tolerance: config.tolerance,
    })
}

fn draw_instance(config: &GradCheckConfig, rng: &mut Rng) -> Result<(ModelParams, Vec<usize>, DenseVector)> {
    let mut params = ModelParams::zeros(config.model_config())?;
    for b in params.blocks_mut() {
        for x in b.data.iter_mut() {
            *x = rng.uniform(-config.init_range, config.init_range);
        }
    }
    let first = UNK_INDEX + 1;
    let tokens = (0..config.sentence_len)
        .map(|_| first + rng.below(config.vocab_size - first))
        .collect();
    let image = (0..config.image_dim).map(|_| rng.normal()).collect();
    Ok((params, tokens, image))
}

/// Smallest `|pre-activation|` over every ReLU unit in the sentence;
/// infinite for the baseline, which has none.
fn min_relu_margin(params: &ModelParams, tokens: &[usize], image: &DenseVector) -> Result<f64> {
    if let Weights::SimpleRnn(_) = params.weights() {
        return Ok(f64::INFINITY);
    }
    let trace = forward_sentence(params, tokens, image)?;
    Ok(trace
        .steps
        .iter()
        .flat_map(|s| s.embed2_pre.iter().chain(s.recurrent_pre.iter()))
        .map(|x| x.abs())
        .fold(f64::INFINITY, f64::min))
}

fn check_instance(
    params: &ModelParams,
    tokens: &[usize],
    image: &DenseVector,
    config: &GradCheckConfig,
) -> Result<Vec<BlockError>> {
    let (mut grads, _) = sentence_gradients(params, tokens, image)?;
    if let Some(name) = &config.corrupt_block {
        for b in grads.blocks_mut() {
            if b.name == name {
                b.data.iter_mut().for_each(|g| *g = 1.1 * *g + 1e-3);
            }
        }
    }
    let h = config.step;
    let mut probe = params.clone();
    let mut out = Vec::new();
    for (bi, analytic) in grads.blocks().iter().enumerate() {
        let mut max_rel: f64 = 0.0;
        let mut max_abs: f64 = 0.0;
        for (k, &a) in analytic.data.iter().enumerate() {
            let orig = params.blocks()[bi].data[k];
            probe.blocks_mut()[bi].data[k] = orig + h;
            let up = sentence_loss(&probe, tokens, image)?;
            probe.blocks_mut()[bi].data[k] = orig - h;
            let down = sentence_loss(&probe, tokens, image)?;
            probe.blocks_mut()[bi].data[k] = orig;
            let n = (up - down) / (2.0 * h);
            let abs = (a - n).abs();
            max_abs = max_abs.max(abs);
            max_rel = max_rel.max(abs / a.abs().max(n.abs()).max(config.floor));
        }
        out.push(BlockError {
            block: analytic.name,
            max_rel_error: max_rel,
            max_abs_error: max_abs,
        });
    }
    Ok(out)
}
