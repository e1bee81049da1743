//! Batch assembly, the optimization loop, margin-state lifecycle, and the
//! ablation switches.
//!
//! Each step: (1) recompute the adaptive thresholds from the previous
//! step's cached similarities, (2) evaluate the objective, (3) apply the
//! optimizer with decoupled weight decay, (4) clamp the margin parameter
//! `a` to its lower bound, (5) cache this step's batch-mean similarities
//! for the next step's thresholds.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::encoders::{EncoderConfig, EncoderParams, TextEncoderVariant, Vocab};
use crate::error::{Error, Result};
use crate::eval::{self, BenchmarkItem, EvalReport};
use crate::losses::{self, AblationFlags, LossValues, MarginState};
use crate::pipeline::{self, BatchInputs, PipelineConfig};
use crate::rng::{fnv1a, substream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerChoice {
    Adam,
    Sgd,
}

/// Full training configuration; serializes to the JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub tau: f64,
    /// Negatives generated per kind when building the negative corpus.
    pub k_per_kind: usize,
    /// Fixed negative-slot count per sample during training; samples with
    /// fewer negatives are padded by cycling their own.
    pub negative_slots: usize,
    pub seed: u64,
    pub flags: AblationFlags,
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub max_len: usize,
    pub variant: TextEncoderVariant,
    pub detach_visual_from_text: bool,
    pub optimizer: OptimizerChoice,
}

impl TrainConfig {
    /// Small preset that trains in seconds. Batch and temperature are tuned
    /// so the hard-negative terms carry weight next to the contrastive term
    /// (a soft τ keeps contrastive gradients from dwarfing the unit-weight
    /// margin terms; small batches keep in-batch contrast from already
    /// solving composition on its own).
    pub fn desk() -> Self {
        Self {
            batch_size: 8,
            epochs: 4,
            learning_rate: 2e-3,
            weight_decay: 0.01,
            tau: 0.5,
            k_per_kind: 2,
            negative_slots: 4,
            seed: 7,
            flags: AblationFlags::default(),
            hidden_dim: 16,
            embed_dim: 32,
            max_len: 16,
            variant: TextEncoderVariant::PositionGated,
            detach_visual_from_text: false,
            optimizer: OptimizerChoice::Adam,
        }
    }

    /// The published fine-tuning hyperparameters (batch 128, lr 2e-5,
    /// weight decay 0.1, 10 epochs) with the conventional τ = 0.07, applied
    /// to the desk-scale encoders.
    pub fn paper_mscoco() -> Self {
        Self {
            batch_size: 128,
            epochs: 10,
            learning_rate: 2e-5,
            weight_decay: 0.1,
            tau: 0.07,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper-mscoco" => Ok(Self::paper_mscoco()),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::Config("batch_size and epochs must be positive".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config("weight_decay must be ≥ 0".into()));
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config("tau must be > 0".into()));
        }
        if self.k_per_kind == 0 {
            return Err(Error::Config("k_per_kind must be ≥ 1".into()));
        }
        if self.hidden_dim == 0 || self.embed_dim == 0 || self.max_len == 0 {
            return Err(Error::Config("encoder dims must be positive".into()));
        }
        Ok(())
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            tau: self.tau,
            flags: self.flags,
            detach_visual_from_text: self.detach_visual_from_text,
        }
    }
}

/// One training sample after corpus join: token ids for the caption, image
/// features, and the token ids of each textual negative in slot order.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub id: String,
    pub caption_ids: Vec<usize>,
    pub features: Vec<f64>,
    pub negative_ids: Vec<Vec<usize>>,
}

/// Builds rectangular batch inputs with exactly `k` negative slots per
/// sample, padding short negative lists by cycling them.
pub fn assemble_batch(samples: &[&TrainSample], k: usize) -> Result<BatchInputs> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("batch"));
    }
    let mut captions = Vec::with_capacity(samples.len());
    let mut features = Vec::with_capacity(samples.len());
    let mut negatives = Vec::with_capacity(samples.len());
    for sample in samples {
        if k > 0 && sample.negative_ids.is_empty() {
            return Err(Error::Config(format!(
                "sample {} has no negatives; it should have been dropped at load",
                sample.id
            )));
        }
        captions.push(sample.caption_ids.clone());
        features.push(sample.features.clone());
        let padded: Vec<Vec<usize>> = (0..k)
            .map(|slot| sample.negative_ids[slot % sample.negative_ids.len()].clone())
            .collect();
        negatives.push(padded);
    }
    let inputs = BatchInputs {
        captions,
        features,
        negatives,
    };
    inputs.validate()?;
    Ok(inputs)
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// Moment estimates for the flat parameter vector.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl OptimizerState {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One optimizer step over the flat parameter vector. Weight decay is
/// decoupled: it scales the pre-step weights directly instead of being
/// folded into the gradient.
pub fn optimizer_update(
    choice: OptimizerChoice,
    params: &mut [f64],
    grads: &[f64],
    state: &mut OptimizerState,
    lr: f64,
    weight_decay: f64,
) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), state.m.len());
    match choice {
        OptimizerChoice::Adam => {
            state.t += 1;
            let bc1 = 1.0 - ADAM_BETA1.powi(state.t as i32);
            let bc2 = 1.0 - ADAM_BETA2.powi(state.t as i32);
            for i in 0..params.len() {
                let g = grads[i];
                state.m[i] = ADAM_BETA1 * state.m[i] + (1.0 - ADAM_BETA1) * g;
                state.v[i] = ADAM_BETA2 * state.v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = state.m[i] / bc1;
                let v_hat = state.v[i] / bc2;
                let old = params[i];
                params[i] = old - lr * (m_hat / (v_hat.sqrt() + ADAM_EPS)) - lr * weight_decay * old;
            }
        }
        OptimizerChoice::Sgd => {
            state.t += 1;
            for i in 0..params.len() {
                let old = params[i];
                params[i] = old - lr * grads[i] - lr * weight_decay * old;
            }
        }
    }
}

/// Per-step metrics row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: u64,
    pub values: LossValues,
    pub a: f64,
    pub thresholds: Vec<f64>,
}

/// Benchmark accuracy measured at an epoch boundary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    pub epoch: usize,
    pub overall_accuracy: f64,
    pub per_category: Vec<(String, usize, f64)>,
}

impl EvalSummary {
    fn from_report(epoch: usize, report: &EvalReport) -> Self {
        Self {
            epoch,
            overall_accuracy: report.overall_accuracy,
            per_category: report
                .per_category
                .iter()
                .map(|c| (c.category.clone(), c.count, c.accuracy))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub feature_dim: usize,
    pub steps: Vec<StepRecord>,
    pub epoch_evals: Vec<EvalSummary>,
    pub dropped_samples: usize,
    pub reinitialized_slots: usize,
    pub checkpoint_id: String,
    pub wall_clock_secs: f64,
}

pub struct TrainOutcome {
    pub params: EncoderParams,
    pub margin: MarginState,
    pub report: TrainReport,
}

/// Runs one optimization step; returns the step record and the number of
/// threshold slots that had to be reinitialized.
pub fn train_step(
    inputs: &BatchInputs,
    params: &mut EncoderParams,
    margin: &mut MarginState,
    opt: &mut OptimizerState,
    config: &TrainConfig,
) -> Result<(StepRecord, usize)> {
    let k = inputs.slots();
    let reinitialized = margin.update_adaptive_thresholds(k);

    let (values, grads, assembled) =
        pipeline::total_with_param_grads(params, inputs, margin, &config.pipeline())?;
    for (name, v) in [
        ("l_cont", values.l_cont),
        ("l_neg", values.l_neg),
        ("l_mar", values.l_mar),
        ("l_total", values.l_total),
    ] {
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "{name} at step {} (batch of {})",
                margin.step,
                inputs.batch_size()
            )));
        }
    }
    let (mean_pos, mean_neg) = losses::batch_mean_similarities(&assembled.tensors)?;

    let mut flat = params.flatten();
    flat.push(margin.a);
    let flat_grads = grads.flatten();
    optimizer_update(
        config.optimizer,
        &mut flat,
        &flat_grads,
        opt,
        config.learning_rate,
        config.weight_decay,
    );
    let a_new = flat.pop().expect("flat vector includes a");
    params.assign_flat(&flat)?;
    margin.a = a_new;
    margin.clamp_a();
    margin.cache_similarities(mean_pos, mean_neg);

    Ok((
        StepRecord {
            step: margin.step,
            values,
            a: margin.a,
            thresholds: margin.thresholds.clone(),
        },
        reinitialized,
    ))
}

/// Full training run over a prepared sample set, evaluating the benchmark
/// at every epoch end.
pub fn train(
    config: &TrainConfig,
    samples: &[TrainSample],
    benchmark: &[BenchmarkItem],
    vocab: &Vocab,
) -> Result<TrainOutcome> {
    config.validate()?;
    let start = Instant::now();

    let kept: Vec<&TrainSample> = samples
        .iter()
        .filter(|s| !s.negative_ids.is_empty())
        .collect();
    let dropped_samples = samples.len() - kept.len();
    if kept.is_empty() {
        return Err(Error::EmptyInput("training samples (all dropped)"));
    }
    let feature_dim = kept[0].features.len();

    let encoder_config = EncoderConfig {
        vocab_size: vocab.len(),
        hidden_dim: config.hidden_dim,
        embed_dim: config.embed_dim,
        feature_dim,
        max_len: config.max_len,
        variant: config.variant,
    };
    let mut init_rng = substream(config.seed, "init");
    let mut params = EncoderParams::init(encoder_config, &mut init_rng)?;
    let mut margin = MarginState::init(config.negative_slots, &mut init_rng);
    let mut opt = OptimizerState::new(params.param_count() + 1);
    let mut shuffle_rng = substream(config.seed, "shuffle");

    let mut steps = Vec::new();
    let mut epoch_evals = Vec::new();
    let mut reinitialized_slots = 0;
    let mut order: Vec<usize> = (0..kept.len()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&TrainSample> = chunk.iter().map(|&i| kept[i]).collect();
            let inputs = assemble_batch(&batch, config.negative_slots)?;
            let (record, reinit) =
                train_step(&inputs, &mut params, &mut margin, &mut opt, config)?;
            reinitialized_slots += reinit;
            steps.push(record);
        }
        if !benchmark.is_empty() {
            let report = eval::evaluate_choice(&params, vocab, benchmark)?;
            epoch_evals.push(EvalSummary::from_report(epoch + 1, &report));
        }
    }

    let checkpoint_id = params_digest(&params, margin.a);
    let report = TrainReport {
        config: config.clone(),
        feature_dim,
        steps,
        epoch_evals,
        dropped_samples,
        reinitialized_slots,
        checkpoint_id,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok(TrainOutcome {
        params,
        margin,
        report,
    })
}

/// Joins caption, feature, and negative records by id into train samples.
/// Captions drive the order; a missing feature row is an error, while a
/// missing negative set leaves the sample empty (dropped later, counted).
pub fn samples_from_parts(
    captions: &[(String, Vec<String>)],
    features: &[(String, Vec<f64>)],
    negatives: &std::collections::BTreeMap<String, Vec<Vec<String>>>,
    vocab: &Vocab,
) -> Result<Vec<TrainSample>> {
    let feature_by_id: std::collections::BTreeMap<&str, &Vec<f64>> = features
        .iter()
        .map(|(id, values)| (id.as_str(), values))
        .collect();
    let mut samples = Vec::with_capacity(captions.len());
    for (id, tokens) in captions {
        let features = feature_by_id
            .get(id.as_str())
            .ok_or_else(|| Error::Config(format!("no features for caption {id}")))?;
        let negative_ids = negatives
            .get(id)
            .map(|lists| {
                lists
                    .iter()
                    .map(|tokens| vocab.ids_of(tokens))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?
            .unwrap_or_default();
        samples.push(TrainSample {
            id: id.clone(),
            caption_ids: vocab.ids_of(tokens)?,
            features: (*features).clone(),
            negative_ids,
        });
    }
    Ok(samples)
}

/// Stable content digest of the parameters (and `a`), used as checkpoint id.
pub fn params_digest(params: &EncoderParams, a: f64) -> String {
    let mut bytes = Vec::new();
    for v in params.flatten() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend_from_slice(&a.to_le_bytes());
    format!("ckpt-{:016x}", fnv1a(&bytes))
}
