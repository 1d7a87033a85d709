//! Anti-model toolkit: n-gram negative data, unlikelihood-trained LSTM
//! language models, and perplexity / agreement evaluation.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod lm;
pub mod ngram;
pub mod pipeline;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
