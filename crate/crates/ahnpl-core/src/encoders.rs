//! Toy dual encoders mapping captions and image features into one shared
//! embedding space, with exact analytic backward passes.
//!
//! Text side: mean-pooled token embeddings followed by an affine projection.
//! Two variants ship. The bag-of-tokens reference is order-insensitive and
//! exists for gradient tests. The position-gated variant multiplies each
//! token embedding elementwise by a learned per-position gate before
//! pooling, which makes the embedding change when two distinct tokens swap
//! places. (Concatenating a position embedding before averaging would not:
//! the mean of concatenated parts is the pair of part means, which is
//! invariant under token swaps.)
//!
//! Image side: a single affine projection of the feature vector.

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingVector;
use crate::error::{Error, Result};
use crate::textgen::PosLexicon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextEncoderVariant {
    BagOfTokens,
    PositionGated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub vocab_size: usize,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub feature_dim: usize,
    pub max_len: usize,
    pub variant: TextEncoderVariant,
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("vocab_size", self.vocab_size),
            ("hidden_dim", self.hidden_dim),
            ("embed_dim", self.embed_dim),
            ("feature_dim", self.feature_dim),
            ("max_len", self.max_len),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// All learnable encoder parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub config: EncoderConfig,
    /// V×H token embedding table.
    pub token_table: Vec<Vec<f64>>,
    /// max_len×H position gates (empty for the bag variant).
    pub pos_table: Vec<Vec<f64>>,
    /// H×D text projection.
    pub text_proj: Vec<Vec<f64>>,
    pub text_bias: Vec<f64>,
    /// F×D image projection.
    pub image_proj: Vec<Vec<f64>>,
    pub image_bias: Vec<f64>,
}

fn gaussian_matrix(rows: usize, cols: usize, sigma: f64, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect()
}

impl EncoderParams {
    /// Deterministic initialization from the caller's generator; weights are
    /// Gaussian at scale 1/√fan_in, position gates sit near 1.
    pub fn init(config: EncoderConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let sigma_h = 1.0 / (config.hidden_dim as f64).sqrt();
        let sigma_f = 1.0 / (config.feature_dim as f64).sqrt();
        let token_table = gaussian_matrix(config.vocab_size, config.hidden_dim, sigma_h, rng);
        let pos_table = match config.variant {
            TextEncoderVariant::BagOfTokens => Vec::new(),
            TextEncoderVariant::PositionGated => {
                // Gates start near-neutral: the encoder behaves almost like a
                // bag at init and order-sensitivity is learned, not baked in.
                // The jitter keeps token swaps from being exact ties.
                let mut gates = gaussian_matrix(config.max_len, config.hidden_dim, 0.01, rng);
                for row in &mut gates {
                    for g in row {
                        *g += 1.0;
                    }
                }
                gates
            }
        };
        let text_proj = gaussian_matrix(config.hidden_dim, config.embed_dim, sigma_h, rng);
        let text_bias = gaussian_matrix(1, config.embed_dim, sigma_h, rng).remove(0);
        let image_proj = gaussian_matrix(config.feature_dim, config.embed_dim, sigma_f, rng);
        let image_bias = gaussian_matrix(1, config.embed_dim, sigma_f, rng).remove(0);
        Ok(Self {
            config,
            token_table,
            pos_table,
            text_proj,
            text_bias,
            image_proj,
            image_bias,
        })
    }

    pub fn param_count(&self) -> usize {
        self.flatten().len()
    }

    /// Flattens every parameter tensor in a fixed order (token table, gates,
    /// text projection, text bias, image projection, image bias).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for row in &self.token_table {
            out.extend_from_slice(row);
        }
        for row in &self.pos_table {
            out.extend_from_slice(row);
        }
        for row in &self.text_proj {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.text_bias);
        for row in &self.image_proj {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.image_bias);
        out
    }

    /// Writes a flat vector (as produced by [`Self::flatten`]) back into the
    /// structured tensors.
    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.param_count();
        if flat.len() != expected {
            return Err(Error::DimMismatch {
                left: flat.len(),
                right: expected,
            });
        }
        let mut it = flat.iter().copied();
        let mut fill = |row: &mut [f64]| {
            for v in row {
                *v = it.next().unwrap();
            }
        };
        for row in &mut self.token_table {
            fill(row);
        }
        for row in &mut self.pos_table {
            fill(row);
        }
        for row in &mut self.text_proj {
            fill(row);
        }
        fill(&mut self.text_bias);
        for row in &mut self.image_proj {
            fill(row);
        }
        fill(&mut self.image_bias);
        Ok(())
    }

    /// Human-readable name of a flat coordinate, for gradient-check reports.
    pub fn coord_name(&self, mut idx: usize) -> String {
        let blocks: [(&str, usize, usize); 6] = [
            ("token_table", self.token_table.len(), self.config.hidden_dim),
            ("pos_table", self.pos_table.len(), self.config.hidden_dim),
            ("text_proj", self.text_proj.len(), self.config.embed_dim),
            ("text_bias", 1, self.text_bias.len()),
            ("image_proj", self.image_proj.len(), self.config.embed_dim),
            ("image_bias", 1, self.image_bias.len()),
        ];
        for (name, rows, cols) in blocks {
            let size = rows * cols;
            if idx < size {
                return format!("{name}[{}][{}]", idx / cols, idx % cols);
            }
            idx -= size;
        }
        format!("out_of_range[{idx}]")
    }
}

/// Gradient accumulator mirroring [`EncoderParams`] shapes exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderGrads {
    pub token_table: Vec<Vec<f64>>,
    pub pos_table: Vec<Vec<f64>>,
    pub text_proj: Vec<Vec<f64>>,
    pub text_bias: Vec<f64>,
    pub image_proj: Vec<Vec<f64>>,
    pub image_bias: Vec<f64>,
}

impl EncoderGrads {
    pub fn zeros_like(params: &EncoderParams) -> Self {
        let zero = |m: &Vec<Vec<f64>>| m.iter().map(|r| vec![0.0; r.len()]).collect();
        Self {
            token_table: zero(&params.token_table),
            pos_table: zero(&params.pos_table),
            text_proj: zero(&params.text_proj),
            text_bias: vec![0.0; params.text_bias.len()],
            image_proj: zero(&params.image_proj),
            image_bias: vec![0.0; params.image_bias.len()],
        }
    }

    /// Same flat ordering as [`EncoderParams::flatten`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for row in &self.token_table {
            out.extend_from_slice(row);
        }
        for row in &self.pos_table {
            out.extend_from_slice(row);
        }
        for row in &self.text_proj {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.text_bias);
        for row in &self.image_proj {
            out.extend_from_slice(row);
        }
        out.extend_from_slice(&self.image_bias);
        out
    }
}

/// Forward context needed to backpropagate one text encoding.
#[derive(Debug, Clone)]
pub struct TextActivation {
    pub token_ids: Vec<usize>,
    pub hidden: Vec<f64>,
}

fn check_ids(params: &EncoderParams, ids: &[usize]) -> Result<()> {
    if ids.is_empty() {
        return Err(Error::EmptyInput("token ids"));
    }
    for &id in ids {
        if id >= params.config.vocab_size {
            return Err(Error::TokenOutOfRange {
                id,
                vocab: params.config.vocab_size,
            });
        }
    }
    if params.config.variant == TextEncoderVariant::PositionGated
        && ids.len() > params.config.max_len
    {
        return Err(Error::Config(format!(
            "caption length {} exceeds max_len {}",
            ids.len(),
            params.config.max_len
        )));
    }
    Ok(())
}

/// Raw (unnormalized) text embedding plus the activation for backward.
pub fn encode_text_with_activation(
    params: &EncoderParams,
    ids: &[usize],
) -> Result<(Vec<f64>, TextActivation)> {
    check_ids(params, ids)?;
    let h_dim = params.config.hidden_dim;
    let d_dim = params.config.embed_dim;
    let len = ids.len() as f64;
    let mut hidden = vec![0.0; h_dim];
    for (pos, &id) in ids.iter().enumerate() {
        let row = &params.token_table[id];
        match params.config.variant {
            TextEncoderVariant::BagOfTokens => {
                for j in 0..h_dim {
                    hidden[j] += row[j];
                }
            }
            TextEncoderVariant::PositionGated => {
                let gate = &params.pos_table[pos];
                for j in 0..h_dim {
                    hidden[j] += row[j] * gate[j];
                }
            }
        }
    }
    for h in &mut hidden {
        *h /= len;
    }
    let mut out = vec![0.0; d_dim];
    for j in 0..h_dim {
        let h = hidden[j];
        let w = &params.text_proj[j];
        for d in 0..d_dim {
            out[d] += h * w[d];
        }
    }
    for d in 0..d_dim {
        out[d] += params.text_bias[d];
    }
    let activation = TextActivation {
        token_ids: ids.to_vec(),
        hidden,
    };
    Ok((out, activation))
}

/// Raw text embedding.
pub fn encode_text(params: &EncoderParams, ids: &[usize]) -> Result<EmbeddingVector> {
    let (out, _) = encode_text_with_activation(params, ids)?;
    EmbeddingVector::new(out)
}

/// Raw image embedding: affine projection of the feature vector.
pub fn encode_image_raw(params: &EncoderParams, features: &[f64]) -> Result<Vec<f64>> {
    if features.len() != params.config.feature_dim {
        return Err(Error::DimMismatch {
            left: features.len(),
            right: params.config.feature_dim,
        });
    }
    if features.iter().any(|f| !f.is_finite()) {
        return Err(Error::NonFinite("image features".into()));
    }
    let d_dim = params.config.embed_dim;
    let mut out = vec![0.0; d_dim];
    for (j, &f) in features.iter().enumerate() {
        let w = &params.image_proj[j];
        for d in 0..d_dim {
            out[d] += f * w[d];
        }
    }
    for d in 0..d_dim {
        out[d] += params.image_bias[d];
    }
    Ok(out)
}

pub fn encode_image(params: &EncoderParams, features: &[f64]) -> Result<EmbeddingVector> {
    EmbeddingVector::new(encode_image_raw(params, features)?)
}

/// Accumulates text-encoder parameter gradients for one caption given the
/// upstream gradient of its embedding.
pub fn backward_text(
    params: &EncoderParams,
    activation: &TextActivation,
    upstream: &[f64],
    grads: &mut EncoderGrads,
) {
    let h_dim = params.config.hidden_dim;
    let d_dim = params.config.embed_dim;
    debug_assert_eq!(upstream.len(), d_dim);
    for d in 0..d_dim {
        grads.text_bias[d] += upstream[d];
    }
    let mut d_hidden = vec![0.0; h_dim];
    for j in 0..h_dim {
        let h = activation.hidden[j];
        let w = &params.text_proj[j];
        let gw = &mut grads.text_proj[j];
        let mut acc = 0.0;
        for d in 0..d_dim {
            gw[d] += h * upstream[d];
            acc += w[d] * upstream[d];
        }
        d_hidden[j] = acc;
    }
    let inv_len = 1.0 / activation.token_ids.len() as f64;
    for (pos, &id) in activation.token_ids.iter().enumerate() {
        match params.config.variant {
            TextEncoderVariant::BagOfTokens => {
                let gt = &mut grads.token_table[id];
                for j in 0..h_dim {
                    gt[j] += d_hidden[j] * inv_len;
                }
            }
            TextEncoderVariant::PositionGated => {
                let gate = &params.pos_table[pos];
                let token = &params.token_table[id];
                for j in 0..h_dim {
                    grads.token_table[id][j] += d_hidden[j] * gate[j] * inv_len;
                    grads.pos_table[pos][j] += d_hidden[j] * token[j] * inv_len;
                }
            }
        }
    }
}

/// Accumulates image-encoder parameter gradients for one image.
pub fn backward_image(
    params: &EncoderParams,
    features: &[f64],
    upstream: &[f64],
    grads: &mut EncoderGrads,
) {
    let d_dim = params.config.embed_dim;
    debug_assert_eq!(upstream.len(), d_dim);
    for d in 0..d_dim {
        grads.image_bias[d] += upstream[d];
    }
    for (j, &f) in features.iter().enumerate() {
        let gw = &mut grads.image_proj[j];
        for d in 0..d_dim {
            gw[d] += f * upstream[d];
        }
    }
}

/// Word ↔ token-id mapping shared by training, evaluation, and checkpoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vocab {
    words: Vec<String>,
    #[serde(skip)]
    index: BTreeMap<String, usize>,
}

impl Vocab {
    pub fn from_words(words: Vec<String>) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::EmptyInput("vocabulary"));
        }
        let mut index = BTreeMap::new();
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() {
                return Err(Error::EmptyInput("vocabulary word"));
            }
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Self { words, index })
    }

    /// Vocabulary over a lexicon's words, in sorted order.
    pub fn from_lexicon(lexicon: &PosLexicon) -> Self {
        let words: Vec<String> = lexicon.words().map(|(w, _)| w.to_string()).collect();
        Self::from_words(words).expect("lexicon is nonempty and deduplicated")
    }

    pub fn id_of(&self, word: &str) -> Result<usize> {
        self.index
            .get(word)
            .copied()
            .ok_or_else(|| Error::UnknownWord(word.to_string()))
    }

    pub fn ids_of(&self, tokens: &[String]) -> Result<Vec<usize>> {
        tokens.iter().map(|t| self.id_of(t)).collect()
    }

    pub fn word(&self, id: usize) -> Option<&str> {
        self.words.get(id).map(String::as_str)
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Rebuilds the lookup index after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .words
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i))
            .collect();
    }
}
