use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which network a parameter set describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Two embedding layers, ReLU recurrence, multimodal fusion with the
    /// image feature, softmax output.
    Multimodal,
    /// Image-free Elman network: sigmoid recurrence over `[w(t) r(t-1)]`,
    /// softmax output.
    SimpleRnn,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mrnn" | "m-rnn" | "multimodal" => Ok(Variant::Multimodal),
            "baseline" | "rnn" | "simple" | "simple-rnn" => Ok(Variant::SimpleRnn),
            other => Err(Error::InvalidConfig(format!("unknown model variant `{other}`"))),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Multimodal => "mrnn",
            Variant::SimpleRnn => "baseline",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub variant: Variant,
    pub vocab_size: usize,
    pub embed1_dim: usize,
    pub embed2_dim: usize,
    pub recurrent_dim: usize,
    /// Unused by [`Variant::SimpleRnn`].
    pub multimodal_dim: usize,
    /// Unused by [`Variant::SimpleRnn`].
    pub image_dim: usize,
}

impl ModelConfig {
    pub const DEFAULT_EMBED_DIM: usize = 128;
    pub const DEFAULT_RECURRENT_DIM: usize = 256;
    pub const DEFAULT_MULTIMODAL_DIM: usize = 512;

    pub fn new(variant: Variant, vocab_size: usize, image_dim: usize) -> Self {
        Self {
            variant,
            vocab_size,
            embed1_dim: Self::DEFAULT_EMBED_DIM,
            embed2_dim: Self::DEFAULT_EMBED_DIM,
            recurrent_dim: Self::DEFAULT_RECURRENT_DIM,
            multimodal_dim: Self::DEFAULT_MULTIMODAL_DIM,
            image_dim,
        }
    }

    pub fn with_dims(mut self, embed1: usize, embed2: usize, recurrent: usize, multimodal: usize) -> Self {
        self.embed1_dim = embed1;
        self.embed2_dim = embed2;
        self.recurrent_dim = recurrent;
        self.multimodal_dim = multimodal;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let mut dims = vec![
            ("vocab_size", self.vocab_size),
            ("recurrent_dim", self.recurrent_dim),
        ];
        if self.variant == Variant::Multimodal {
            dims.extend([
                ("embed1_dim", self.embed1_dim),
                ("embed2_dim", self.embed2_dim),
                ("multimodal_dim", self.multimodal_dim),
                ("image_dim", self.image_dim),
            ]);
        }
        for (name, d) in dims {
            if d == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.vocab_size < 2 {
            return Err(Error::InvalidConfig("vocab_size must be at least 2".into()));
        }
        Ok(())
    }
}
