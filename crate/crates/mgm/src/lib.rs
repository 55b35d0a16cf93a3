//! Motif-to-melody generation: per-type variant branches, region and
//! motif/variant masks, aligned positional encoding, and a gated
//! encoder-decoder trained on the CPU with a small hand-written autodiff.

pub mod branch;
pub mod checkpoint;
pub mod data;
pub mod gradcheck;
pub mod grammar;
pub mod masks;
pub mod model;
pub mod params;
pub mod phrase;
pub mod sampling;
pub mod tape;
pub mod tensor;
pub mod train;

use thiserror::Error;

pub use branch::{generate_variants, train_branch, BranchModel, GeneratedVariants};
pub use masks::{build_mv_mask, build_region_mask, mvape, EncoderLayout, MaskSet};
pub use model::{DecoderMode, ModelConfig, Transformer};
pub use phrase::{generate_phrase, train_phrase, PhraseExample, PhraseOutput};
pub use sampling::SamplingConfig;

#[derive(Debug, Error)]
pub enum MgmError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("sequence of {len} tokens exceeds the model's max length {max}")]
    Length { len: usize, max: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training corpus is empty")]
    EmptyCorpus,
    #[error("loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error(transparent)]
    Mask(#[from] masks::MaskError),
    #[error(transparent)]
    Encode(#[from] motif_core::remi::EncodeError),
    #[error(transparent)]
    Decode(#[from] motif_core::remi::DecodeError),
    #[error("example: {0}")]
    Example(String),
    #[error("no token is admissible after {0} tokens")]
    Stuck(usize),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
