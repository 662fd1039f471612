//! Transformer encoder-decoder with optional length conditioning.

mod checkpoint;
mod config;
mod train;
mod transformer;
mod vocab;

pub use checkpoint::{Checkpoint, FORMAT_VERSION, MAGIC};
pub use config::{LengthMode, ModelConfig};
pub use train::{finetune, prepare_finetune, train, TrainOutcome, TrainRecord};
pub use transformer::Model;
pub use vocab::{Vocab, BOS, EOS, PAD, SPECIALS, UNK};

#[cfg(test)]
pub(crate) use transformer::tests::toy_model;
