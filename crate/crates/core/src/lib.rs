//! Articulatory phoneme features, embedding-function design, meta-learning
//! (MAML, first-order MAML and LAML) over toy acoustic tasks, and monotonic
//! duration extraction, at a scale small enough to verify exactly.

pub mod align;
pub mod analysis;
pub mod artic;
pub mod checkpoint;
pub mod cli;
pub mod embedding;
pub mod error;
pub mod meta_learn;
pub mod nn;
pub mod optim;

pub use align::{brute_force_align, guided_attention_loss, monotonic_viterbi, AttentionMap, DurationSequence};
pub use artic::{
    featurize_utterance, segment_ipa, vectorize, ArticulatoryVector, FeatureBlock, FeatureTable, PhonemeSegment,
};
pub use checkpoint::{Checkpoint, Tensor};
pub use embedding::{artic_distance, train_embedding, Architecture, EmbeddingConfig, EmbeddingParams};
pub use error::{Error, Result};
