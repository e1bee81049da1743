//! End-to-end differentiable path: token ids and image features in,
//! loss values and parameter gradients out.
//!
//! Forward encodes originals and textual negatives, synthesizes the visual
//! negatives by raw addition of the text-side deviation, and packs
//! everything into a [`BatchTensors`]. Backward folds loss gradients on the
//! synthesized visual negatives back into their three constituents
//! (`image + text_neg − text`) and then through the encoders.

use serde::{Deserialize, Serialize};

use crate::encoders::{
    backward_image, backward_text, encode_image_raw, encode_text_with_activation, EncoderGrads,
    EncoderParams, TextActivation,
};
use crate::error::{Error, Result};
use crate::losses::{
    self, AblationFlags, BatchGrads, BatchTensors, LossKind, LossValues, MarginState,
};

/// One batch at the input level: per-sample caption token ids, image
/// features, and K textual-negative token id lists.
#[derive(Debug, Clone)]
pub struct BatchInputs {
    pub captions: Vec<Vec<usize>>,
    pub features: Vec<Vec<f64>>,
    pub negatives: Vec<Vec<Vec<usize>>>,
}

impl BatchInputs {
    pub fn validate(&self) -> Result<()> {
        let n = self.captions.len();
        if n == 0 {
            return Err(Error::EmptyInput("batch inputs"));
        }
        if self.features.len() != n || self.negatives.len() != n {
            return Err(Error::Config(format!(
                "batch inputs are ragged: {} captions, {} features, {} negative lists",
                n,
                self.features.len(),
                self.negatives.len()
            )));
        }
        let k = self.negatives[0].len();
        if self.negatives.iter().any(|negs| negs.len() != k) {
            return Err(Error::Config(
                "negative slot count differs across samples".into(),
            ));
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.captions.len()
    }

    pub fn slots(&self) -> usize {
        self.negatives.first().map_or(0, Vec::len)
    }
}

/// Encoder activations retained for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardActivations {
    pub text: Vec<TextActivation>,
    pub neg_text: Vec<Vec<TextActivation>>,
}

/// Embeddings plus the activations that produced them.
#[derive(Debug, Clone)]
pub struct AssembledBatch {
    pub tensors: BatchTensors,
    pub activations: ForwardActivations,
}

/// Knobs shared by training, gradient checks, and the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub tau: f64,
    pub flags: AblationFlags,
    /// When set, gradients on a synthesized visual negative stop at the
    /// image embedding instead of also flowing into the two text embeddings
    /// that shaped it. Off by default; finite-difference checks require the
    /// full flow.
    pub detach_visual_from_text: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tau: 0.07,
            flags: AblationFlags::default(),
            detach_visual_from_text: false,
        }
    }
}

/// Encodes a batch and synthesizes its visual negatives.
pub fn forward(
    params: &EncoderParams,
    inputs: &BatchInputs,
    tau: f64,
) -> Result<AssembledBatch> {
    inputs.validate()?;
    let n = inputs.batch_size();
    let k = inputs.slots();
    let mut text = Vec::with_capacity(n);
    let mut image = Vec::with_capacity(n);
    let mut text_neg = Vec::with_capacity(n);
    let mut visual_neg = Vec::with_capacity(n);
    let mut text_acts = Vec::with_capacity(n);
    let mut neg_acts = Vec::with_capacity(n);
    for i in 0..n {
        let (e_text, act) = encode_text_with_activation(params, &inputs.captions[i])?;
        let e_image = encode_image_raw(params, &inputs.features[i])?;
        let mut negs = Vec::with_capacity(k);
        let mut acts = Vec::with_capacity(k);
        let mut visuals = Vec::with_capacity(k);
        for ids in &inputs.negatives[i] {
            let (e_neg, act_neg) = encode_text_with_activation(params, ids)?;
            // image + (text_neg − text), coordinatewise in this exact order.
            let visual: Vec<f64> = (0..e_image.len())
                .map(|d| e_image[d] + (e_neg[d] - e_text[d]))
                .collect();
            visuals.push(visual);
            negs.push(e_neg);
            acts.push(act_neg);
        }
        text.push(e_text);
        image.push(e_image);
        text_neg.push(negs);
        visual_neg.push(visuals);
        text_acts.push(act);
        neg_acts.push(acts);
    }
    Ok(AssembledBatch {
        tensors: BatchTensors::new(text, image, text_neg, visual_neg, tau)?,
        activations: ForwardActivations {
            text: text_acts,
            neg_text: neg_acts,
        },
    })
}

/// Parameter-level gradients, keyed by encoder group plus the margin
/// parameter `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub encoders: EncoderGrads,
    pub a: f64,
}

impl ParamGrads {
    /// Flat layout `[encoder params..., a]`, matching
    /// `EncoderParams::flatten` plus one trailing coordinate.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = self.encoders.flatten();
        out.push(self.a);
        out
    }
}

/// Folds embedding-level gradients through the visual-negative construction
/// and the encoders into parameter gradients.
pub fn backward(
    params: &EncoderParams,
    inputs: &BatchInputs,
    assembled: &AssembledBatch,
    batch_grads: &BatchGrads,
    detach_visual_from_text: bool,
) -> ParamGrads {
    let n = inputs.batch_size();
    let k = inputs.slots();
    let d = params.config.embed_dim;
    let mut grads = EncoderGrads::zeros_like(params);

    for i in 0..n {
        let mut d_text = batch_grads.d_text[i].clone();
        let mut d_image = batch_grads.d_image[i].clone();
        for slot in 0..k {
            let mut d_neg = batch_grads.d_text_neg[i][slot].clone();
            let d_visual = &batch_grads.d_visual_neg[i][slot];
            for c in 0..d {
                d_image[c] += d_visual[c];
                if !detach_visual_from_text {
                    d_neg[c] += d_visual[c];
                    d_text[c] -= d_visual[c];
                }
            }
            backward_text(
                params,
                &assembled.activations.neg_text[i][slot],
                &d_neg,
                &mut grads,
            );
        }
        backward_text(params, &assembled.activations.text[i], &d_text, &mut grads);
        backward_image(params, &inputs.features[i], &d_image, &mut grads);
    }

    ParamGrads {
        encoders: grads,
        a: batch_grads.d_a,
    }
}

/// Forward, loss, and backward for one loss kind.
pub fn loss_with_param_grads(
    kind: LossKind,
    params: &EncoderParams,
    inputs: &BatchInputs,
    state: &MarginState,
    cfg: &PipelineConfig,
) -> Result<(f64, ParamGrads)> {
    let assembled = forward(params, inputs, cfg.tau)?;
    let (value, batch_grads) = losses::eval_loss(kind, &assembled.tensors, state, cfg.flags)?;
    let grads = backward(
        params,
        inputs,
        &assembled,
        &batch_grads,
        cfg.detach_visual_from_text,
    );
    Ok((value, grads))
}

/// Forward and full objective with parameter gradients.
pub fn total_with_param_grads(
    params: &EncoderParams,
    inputs: &BatchInputs,
    state: &MarginState,
    cfg: &PipelineConfig,
) -> Result<(LossValues, ParamGrads, AssembledBatch)> {
    let assembled = forward(params, inputs, cfg.tau)?;
    let (values, batch_grads) = losses::total_loss(&assembled.tensors, state, cfg.flags)?;
    let grads = backward(
        params,
        inputs,
        &assembled,
        &batch_grads,
        cfg.detach_visual_from_text,
    );
    Ok((values, grads, assembled))
}

/// Forward-only loss value plus hinge activity, for finite differencing.
pub fn loss_value(
    kind: LossKind,
    params: &EncoderParams,
    inputs: &BatchInputs,
    state: &MarginState,
    cfg: &PipelineConfig,
) -> Result<(f64, Vec<bool>)> {
    let assembled = forward(params, inputs, cfg.tau)?;
    losses::loss_value_and_hinges(kind, &assembled.tensors, state, cfg.flags)
}
