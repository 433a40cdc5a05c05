//! Multi-label late fusion over per-modality classifier outputs.
//!
//! The crate is organised around the life of a product-categorisation
//! experiment:
//!
//! - [`label_space`]: dataset records, the filtered label vocabulary, multi-hot
//!   encoding and the deterministic train/test split.
//! - [`text_prep`]: text cleaning profiles for titles and descriptions, token
//!   vocabularies and embedding tables seeded from pretrained word vectors.
//! - [`nn`]: a small double-precision network engine (embedding, 1-D
//!   convolution, global max pooling, dense, dropout) with hand-written
//!   backpropagation, Adam, finite-difference gradient checks and a binary model
//!   container.
//! - [`fusion`]: prediction matrices and the late-fusion policies (max, mean,
//!   ridge regression, policy networks).
//! - [`eval`]: thresholding, micro-averaged F1, per-class miss analysis,
//!   synthetic modalities and report emission.
//!
//! All randomness is derived from a single 64-bit seed through named streams
//! (see [`rng`]), so every pipeline is reproducible bit for bit.

pub mod error;
pub mod eval;
pub mod fusion;
pub mod hash;
pub mod label_space;
pub mod nn;
pub mod rng;
pub mod text_prep;

pub use error::{Error, Result};
pub use eval::{micro_f1, threshold_predictions, EvalReport, SkillProfile};
pub use fusion::{FusionModel, PredictionMatrix};
pub use label_space::{LabelVocabulary, MultiHot, ProductRecord};
pub use nn::{Activation, LayerSpec, Network, TextCnnModel, TrainConfig};
pub use text_prep::{EmbeddingTable, PrepProfile, TokenVocab};
