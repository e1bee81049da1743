//! Desk-scale contrastive-learning engine built around hard-negative
//! perturbation.
//!
//! The pieces, bottom to top:
//!
//! * [`embedding`] — vectors, cosine similarity, similarity matrices.
//! * [`textgen`] — POS-tagged captions and the two textual hard-negative
//!   generators (noun swap, same-POS substitution).
//! * [`perturb`] — visual hard negatives synthesized by adding the
//!   text-side deviation vector to the raw image embedding.
//! * [`losses`] — the contrastive, multimodal hard-negative, and dynamic
//!   margin terms with analytic embedding-level gradients.
//! * [`encoders`] — toy dual encoders with exact backward passes.
//! * [`pipeline`] — end-to-end forward/backward from token ids and image
//!   features to parameter gradients.
//! * [`gradcheck`] — central-finite-difference verification of every loss.
//! * [`synth`] — compositional scene generator, train corpus, and the
//!   binary-choice benchmark.
//! * [`trainer`] — batch assembly, AdamW-style updates, margin-state
//!   lifecycle, ablation flags.
//! * [`eval`] — choice evaluation and embedding-distance reports.
//! * [`formats`] — all on-disk formats (embeddings, corpora, checkpoints,
//!   metrics).

// Numeric kernels use indexed loops on purpose: the summation order is part
// of the determinism contract, and indices keep it visible.
#![allow(clippy::needless_range_loop)]

pub mod embedding;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod formats;
pub mod gradcheck;
pub mod losses;
pub mod perturb;
pub mod pipeline;
pub mod rng;
pub mod synth;
pub mod textgen;
pub mod trainer;

pub use embedding::{EmbeddingVector, SimilarityMatrix};
pub use encoders::{EncoderConfig, EncoderParams, TextEncoderVariant, Vocab};
pub use error::{Error, Result};
pub use eval::{BenchmarkItem, EvalReport};
pub use losses::{AblationFlags, BatchTensors, LossKind, LossValues, MarginState};
pub use pipeline::{BatchInputs, PipelineConfig};
pub use synth::{Category, SynthConfig};
pub use textgen::{Caption, NegativeKind, PosLexicon, PosTag};
pub use trainer::{TrainConfig, TrainReport};
