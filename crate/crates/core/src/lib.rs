//! Multimodal recurrent network (m-RNN) for image captioning and
//! image/sentence retrieval.
//!
//! A caption model conditions a word-level RNN language model on a fixed
//! image feature vector. [`training`] fits it by full backpropagation
//! through time on a perplexity cost, [`inference`] generates captions and
//! scores sentences, and [`evaluation`] computes perplexity, BLEU and
//! retrieval metrics. Everything is `f64` and deterministic for a seed.

mod binio;
pub mod corpus;
pub mod error;
pub mod evaluation;
pub mod inference;
pub mod model;
pub mod numerics;
pub mod training;

pub use error::{Error, Result};
