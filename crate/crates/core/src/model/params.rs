use super::config::{ModelConfig, Variant};
use crate::error::{Error, Result};
use crate::numerics::{fill, DenseMatrix, DenseVector, InitScheme, Rng};

/// Weights of the multimodal network. Matrices map column space to row
/// space, so `y = W x` has `W.rows() == y.dim()`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalWeights {
    /// Word embedding lookup table, one row per vocabulary entry.
    pub embed1: DenseMatrix,
    pub embed2: DenseMatrix,
    pub embed2_bias: DenseVector,
    /// Maps the word representation into the recurrent space.
    pub word_to_recurrent: DenseMatrix,
    pub recurrent: DenseMatrix,
    pub recurrent_bias: DenseVector,
    pub mm_word: DenseMatrix,
    pub mm_recurrent: DenseMatrix,
    pub mm_image: DenseMatrix,
    pub mm_bias: DenseVector,
    pub output: DenseMatrix,
    pub output_bias: DenseVector,
}

/// Weights of the image-free Elman baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct SimpleRnnWeights {
    /// Word columns of the input matrix, stored one row per vocabulary entry
    /// so the one-hot product is a row lookup.
    pub word_input: DenseMatrix,
    pub recurrent: DenseMatrix,
    pub recurrent_bias: DenseVector,
    pub output: DenseMatrix,
    pub output_bias: DenseVector,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Weights {
    Multimodal(MultimodalWeights),
    SimpleRnn(SimpleRnnWeights),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    Weight,
    Bias,
}

/// Read-only view of one parameter tensor.
#[derive(Debug)]
pub struct Block<'a> {
    pub name: &'static str,
    pub kind: BlockKind,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a [f64],
}

#[derive(Debug)]
pub struct BlockMut<'a> {
    pub name: &'static str,
    pub kind: BlockKind,
    pub rows: usize,
    pub cols: usize,
    pub data: &'a mut [f64],
}

macro_rules! block {
    (w $name:literal, $m:expr) => {
        Block {
            name: $name,
            kind: BlockKind::Weight,
            rows: $m.rows(),
            cols: $m.cols(),
            data: $m.as_slice(),
        }
    };
    (b $name:literal, $v:expr) => {
        Block {
            name: $name,
            kind: BlockKind::Bias,
            rows: $v.dim(),
            cols: 1,
            data: $v.as_slice(),
        }
    };
}

macro_rules! block_mut {
    (w $name:literal, $m:expr) => {{
        let (rows, cols) = $m.shape();
        BlockMut {
            name: $name,
            kind: BlockKind::Weight,
            rows,
            cols,
            data: $m.as_mut_slice(),
        }
    }};
    (b $name:literal, $v:expr) => {
        BlockMut {
            name: $name,
            kind: BlockKind::Bias,
            rows: $v.dim(),
            cols: 1,
            data: &mut $v[..],
        }
    };
}

/// Every learnable tensor of one model. A single copy is shared by all
/// time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    config: ModelConfig,
    weights: Weights,
}

impl ModelParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let m = |r, k| DenseMatrix::zeros(r, k);
        let v = DenseVector::zeros;
        let weights = match c.variant {
            Variant::Multimodal => Weights::Multimodal(MultimodalWeights {
                embed1: m(c.vocab_size, c.embed1_dim),
                embed2: m(c.embed2_dim, c.embed1_dim),
                embed2_bias: v(c.embed2_dim),
                word_to_recurrent: m(c.recurrent_dim, c.embed2_dim),
                recurrent: m(c.recurrent_dim, c.recurrent_dim),
                recurrent_bias: v(c.recurrent_dim),
                mm_word: m(c.multimodal_dim, c.embed2_dim),
                mm_recurrent: m(c.multimodal_dim, c.recurrent_dim),
                mm_image: m(c.multimodal_dim, c.image_dim),
                mm_bias: v(c.multimodal_dim),
                output: m(c.vocab_size, c.multimodal_dim),
                output_bias: v(c.vocab_size),
            }),
            Variant::SimpleRnn => Weights::SimpleRnn(SimpleRnnWeights {
                word_input: m(c.vocab_size, c.recurrent_dim),
                recurrent: m(c.recurrent_dim, c.recurrent_dim),
                recurrent_bias: v(c.recurrent_dim),
                output: m(c.vocab_size, c.recurrent_dim),
                output_bias: v(c.vocab_size),
            }),
        };
        Ok(Self { config, weights })
    }

    /// Weight matrices drawn from `scheme` in block order; biases start at zero.
    pub fn init(config: ModelConfig, scheme: InitScheme, rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        for b in p.blocks_mut() {
            if b.kind == BlockKind::Weight {
                fill(b.data, b.rows + b.cols, scheme, rng);
            }
        }
        Ok(p)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut Weights {
        &mut self.weights
    }

    pub fn blocks(&self) -> Vec<Block<'_>> {
        match &self.weights {
            Weights::Multimodal(w) => vec![
                block!(w "E1", w.embed1),
                block!(w "E2", w.embed2),
                block!(b "b_e2", w.embed2_bias),
                block!(w "W_in", w.word_to_recurrent),
                block!(w "U_r", w.recurrent),
                block!(b "b_r", w.recurrent_bias),
                block!(w "V_w", w.mm_word),
                block!(w "V_r", w.mm_recurrent),
                block!(w "V_I", w.mm_image),
                block!(b "b_m", w.mm_bias),
                block!(w "W_out", w.output),
                block!(b "b_out", w.output_bias),
            ],
            Weights::SimpleRnn(w) => vec![
                block!(w "U_w", w.word_input),
                block!(w "U_r", w.recurrent),
                block!(b "b_r", w.recurrent_bias),
                block!(w "V", w.output),
                block!(b "b_out", w.output_bias),
            ],
        }
    }

    pub fn blocks_mut(&mut self) -> Vec<BlockMut<'_>> {
        match &mut self.weights {
            Weights::Multimodal(w) => vec![
                block_mut!(w "E1", w.embed1),
                block_mut!(w "E2", w.embed2),
                block_mut!(b "b_e2", w.embed2_bias),
                block_mut!(w "W_in", w.word_to_recurrent),
                block_mut!(w "U_r", w.recurrent),
                block_mut!(b "b_r", w.recurrent_bias),
                block_mut!(w "V_w", w.mm_word),
                block_mut!(w "V_r", w.mm_recurrent),
                block_mut!(w "V_I", w.mm_image),
                block_mut!(b "b_m", w.mm_bias),
                block_mut!(w "W_out", w.output),
                block_mut!(b "b_out", w.output_bias),
            ],
            Weights::SimpleRnn(w) => vec![
                block_mut!(w "U_w", w.word_input),
                block_mut!(w "U_r", w.recurrent),
                block_mut!(b "b_r", w.recurrent_bias),
                block_mut!(w "V", w.output),
                block_mut!(b "b_out", w.output_bias),
            ],
        }
    }

    pub fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.data.len()).sum()
    }

    /// Squared L2 norm over weight matrices (biases excluded).
    pub fn weight_norm_sq(&self) -> f64 {
        self.blocks()
            .iter()
            .filter(|b| b.kind == BlockKind::Weight)
            .flat_map(|b| b.data.iter())
            .map(|x| x * x)
            .sum()
    }

    pub fn check_finite(&self) -> Result<()> {
        for b in self.blocks() {
            if !b.data.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(format!("parameter block {}", b.name)));
            }
        }
        Ok(())
    }

    /// Input representation of a word: the embedding-1 row for the
    /// multimodal network, the word column of the input matrix for the
    /// baseline.
    pub fn word_vector(&self, index: usize) -> Result<&[f64]> {
        let table = match &self.weights {
            Weights::Multimodal(w) => &w.embed1,
            Weights::SimpleRnn(w) => &w.word_input,
        };
        if index >= table.rows() {
            return Err(Error::IndexOutOfRange {
                context: "vocabulary",
                index,
                len: table.rows(),
            });
        }
        Ok(table.row(index))
    }
}

/// Derivatives of a loss with respect to every parameter; same layout as
/// [`ModelParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    inner: ModelParams,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Self {
            inner: ModelParams::zeros(params.config).expect("config already validated"),
        }
    }

    pub fn as_params(&self) -> &ModelParams {
        &self.inner
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Weights {
        &mut self.inner.weights
    }

    pub fn blocks(&self) -> Vec<Block<'_>> {
        self.inner.blocks()
    }

    pub fn blocks_mut(&mut self) -> Vec<BlockMut<'_>> {
        self.inner.blocks_mut()
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.data.iter_mut().zip(src.data) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for b in self.blocks_mut() {
            b.data.iter_mut().for_each(|x| *x *= factor);
        }
    }

    pub fn norm(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.data.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.blocks()
            .iter()
            .all(|b| b.data.iter().all(|x| x.is_finite()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(variant: Variant) -> ModelConfig {
        ModelConfig::new(variant, 11, 5).with_dims(4, 4, 6, 8)
    }

    #[test]
    fn block_shapes_follow_config() {
        let p = ModelParams::zeros(tiny(Variant::Multimodal)).unwrap();
        let shapes: Vec<_> = p.blocks().iter().map(|b| (b.name, b.rows, b.cols)).collect();
        assert_eq!(
            shapes,
            vec![
                ("E1", 11, 4),
                ("E2", 4, 4),
                ("b_e2", 4, 1),
                ("W_in", 6, 4),
                ("U_r", 6, 6),
                ("b_r", 6, 1),
                ("V_w", 8, 4),
                ("V_r", 8, 6),
                ("V_I", 8, 5),
                ("b_m", 8, 1),
                ("W_out", 11, 8),
                ("b_out", 11, 1),
            ]
        );
        let p = ModelParams::zeros(tiny(Variant::SimpleRnn)).unwrap();
        assert_eq!(p.num_params(), 11 * 6 + 36 + 6 + 11 * 6 + 11);
    }

    #[test]
    fn init_leaves_biases_zero() {
        let p = ModelParams::init(tiny(Variant::Multimodal), InitScheme::Xavier, &mut Rng::new(3))
            .unwrap();
        for b in p.blocks() {
            match b.kind {
                BlockKind::Bias => assert!(b.data.iter().all(|&x| x == 0.0), "{}", b.name),
                BlockKind::Weight => assert!(b.data.iter().any(|&x| x != 0.0), "{}", b.name),
            }
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let mut c = tiny(Variant::Multimodal);
        c.image_dim = 0;
        assert!(ModelParams::zeros(c).is_err());
        c.variant = Variant::SimpleRnn;
        assert!(ModelParams::zeros(c).is_ok());
    }

    #[test]
    fn gradient_arithmetic() {
        let p = ModelParams::zeros(tiny(Variant::SimpleRnn)).unwrap();
        let mut g = Gradients::zeros_like(&p);
        g.blocks_mut()[0].data[0] = 3.0;
        g.blocks_mut()[4].data[1] = 4.0;
        assert_eq!(g.norm(), 5.0);
        let h = g.clone();
        g.add_assign(&h);
        g.scale(0.5);
        assert_eq!(g, h);
    }
}
