//! Every loss term of the objective and its analytic gradients with respect
//! to the batch embeddings and the learnable margin parameter `a`.
//!
//! All terms are plain `f64` math over a [`BatchTensors`]:
//!
//! * symmetric InfoNCE over the N×N cosine matrix (optionally with each
//!   sample's hard-negative captions as extra candidates for its image),
//! * logsumexp suppression of visual and textual hard negatives,
//! * a positive-margin hinge against the learnable bound `a`,
//! * a negative-margin hinge with per-slot adaptive thresholds recomputed
//!   each step from the previous step's batch-mean similarity gaps.
//!
//! Gradients stop at the embedding level; backpropagation through the
//! encoders and through the visual-perturbation construction lives in
//! [`crate::pipeline`].

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_with_grad, dot};
use crate::error::{Error, Result};

/// Lower bound enforced on the learnable positive-margin parameter.
pub const A_MIN: f64 = 0.2;

/// One training batch at the embedding level.
///
/// `text` and `image` are the paired originals (N×D, raw encoder outputs);
/// `text_neg` holds the K textual hard-negative embeddings per sample and
/// `visual_neg` the slot-aligned synthesized visual negatives (both N×K×D).
#[derive(Debug, Clone)]
pub struct BatchTensors {
    pub text: Vec<Vec<f64>>,
    pub image: Vec<Vec<f64>>,
    pub text_neg: Vec<Vec<Vec<f64>>>,
    pub visual_neg: Vec<Vec<Vec<f64>>>,
    pub tau: f64,
}

impl BatchTensors {
    pub fn new(
        text: Vec<Vec<f64>>,
        image: Vec<Vec<f64>>,
        text_neg: Vec<Vec<Vec<f64>>>,
        visual_neg: Vec<Vec<Vec<f64>>>,
        tau: f64,
    ) -> Result<Self> {
        let batch = Self {
            text,
            image,
            text_neg,
            visual_neg,
            tau,
        };
        batch.validate()?;
        Ok(batch)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.text.len();
        if n == 0 {
            return Err(Error::EmptyInput("batch"));
        }
        for (name, len) in [
            ("image", self.image.len()),
            ("text_neg", self.text_neg.len()),
            ("visual_neg", self.visual_neg.len()),
        ] {
            if len != n {
                return Err(Error::Config(format!(
                    "batch field {name} has {len} rows, expected {n}"
                )));
            }
        }
        let d = self.text[0].len();
        let k = self.text_neg[0].len();
        let check_vec = |v: &[f64], what: &str| -> Result<()> {
            if v.len() != d {
                return Err(Error::DimMismatch {
                    left: v.len(),
                    right: d,
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(what.to_string()));
            }
            Ok(())
        };
        for i in 0..n {
            check_vec(&self.text[i], "text embedding")?;
            check_vec(&self.image[i], "image embedding")?;
            if self.text_neg[i].len() != k || self.visual_neg[i].len() != k {
                return Err(Error::Config(format!(
                    "sample {i} has ragged negative slots (expected {k})"
                )));
            }
            for slot in 0..k {
                check_vec(&self.text_neg[i][slot], "textual negative embedding")?;
                check_vec(&self.visual_neg[i][slot], "visual negative embedding")?;
            }
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }

    pub fn batch_size(&self) -> usize {
        self.text.len()
    }

    pub fn slots(&self) -> usize {
        self.text_neg.first().map_or(0, Vec::len)
    }

    pub fn dim(&self) -> usize {
        self.text.first().map_or(0, Vec::len)
    }
}

/// Gradients of a loss with respect to every embedding in the batch, plus
/// the margin parameter. Visual-negative gradients are kept as their own
/// leaf here; folding them back into image/text embeddings is the
/// pipeline's job.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchGrads {
    pub d_text: Vec<Vec<f64>>,
    pub d_image: Vec<Vec<f64>>,
    pub d_text_neg: Vec<Vec<Vec<f64>>>,
    pub d_visual_neg: Vec<Vec<Vec<f64>>>,
    pub d_a: f64,
}

impl BatchGrads {
    pub fn zeros(n: usize, k: usize, d: usize) -> Self {
        Self {
            d_text: vec![vec![0.0; d]; n],
            d_image: vec![vec![0.0; d]; n],
            d_text_neg: vec![vec![vec![0.0; d]; k]; n],
            d_visual_neg: vec![vec![vec![0.0; d]; k]; n],
            d_a: 0.0,
        }
    }

    pub fn zeros_like(batch: &BatchTensors) -> Self {
        Self::zeros(batch.batch_size(), batch.slots(), batch.dim())
    }

    pub fn add_assign(&mut self, other: &BatchGrads) {
        fn add2(a: &mut [Vec<f64>], b: &[Vec<f64>]) {
            for (ra, rb) in a.iter_mut().zip(b) {
                for (x, y) in ra.iter_mut().zip(rb) {
                    *x += *y;
                }
            }
        }
        add2(&mut self.d_text, &other.d_text);
        add2(&mut self.d_image, &other.d_image);
        for (a, b) in self.d_text_neg.iter_mut().zip(&other.d_text_neg) {
            add2(a, b);
        }
        for (a, b) in self.d_visual_neg.iter_mut().zip(&other.d_visual_neg) {
            add2(a, b);
        }
        self.d_a += other.d_a;
    }
}

/// Batch-mean similarities cached from the previous training step, the only
/// inputs to the adaptive threshold update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotCache {
    pub mean_pos: f64,
    pub mean_neg: Vec<f64>,
}

/// Learnable margin parameter, per-slot adaptive thresholds, and the
/// previous-step similarity cache that feeds them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginState {
    pub a: f64,
    pub thresholds: Vec<f64>,
    pub prev: Option<SlotCache>,
    pub step: u64,
}

impl MarginState {
    /// Draws `a` from a standard normal, clamped up to [`A_MIN`].
    pub fn init(slots: usize, rng: &mut impl Rng) -> Self {
        let draw: f64 = rng.sample(StandardNormal);
        Self {
            a: draw.max(A_MIN),
            thresholds: vec![0.0; slots],
            prev: None,
            step: 0,
        }
    }

    pub fn with_a(a: f64, slots: usize) -> Self {
        Self {
            a,
            thresholds: vec![0.0; slots],
            prev: None,
            step: 0,
        }
    }

    /// Recomputes the per-slot thresholds from the previous step's cached
    /// batch means: `M_n = mean S(I,T) − mean S(I,T_n)`. With no cache
    /// (first step) every threshold is 0. Slots without a cached mean are
    /// reinitialized to 0; the count of such slots is returned so callers
    /// can log it.
    pub fn update_adaptive_thresholds(&mut self, slots: usize) -> usize {
        let mut reinitialized = 0;
        self.thresholds = match &self.prev {
            None => vec![0.0; slots],
            Some(cache) => (0..slots)
                .map(|n| {
                    if n < cache.mean_neg.len() {
                        cache.mean_pos - cache.mean_neg[n]
                    } else {
                        reinitialized += 1;
                        0.0
                    }
                })
                .collect(),
        };
        self.step += 1;
        reinitialized
    }

    /// Stores this step's batch-mean similarities for the next step.
    pub fn cache_similarities(&mut self, mean_pos: f64, mean_neg: Vec<f64>) {
        self.prev = Some(SlotCache { mean_pos, mean_neg });
    }

    pub fn clamp_a(&mut self) {
        if self.a < A_MIN {
            self.a = A_MIN;
        }
    }
}

/// Values of every loss term for one batch.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossValues {
    pub l_cont: f64,
    pub l_neg_visual: f64,
    pub l_neg_textual: f64,
    pub l_neg: f64,
    pub l_mar_pos: f64,
    pub l_mar_neg: f64,
    pub l_mar: f64,
    pub l_total: f64,
}

/// Ablation switches. `use_negatives` adds each sample's hard-negative
/// captions to the contrastive denominators; `use_mhnl` enables the
/// multimodal hard-negative terms; `use_dmcl` enables both margin terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationFlags {
    pub use_negatives: bool,
    pub use_mhnl: bool,
    pub use_dmcl: bool,
}

impl Default for AblationFlags {
    fn default() -> Self {
        Self {
            use_negatives: true,
            use_mhnl: true,
            use_dmcl: true,
        }
    }
}

impl AblationFlags {
    pub fn contrastive_only() -> Self {
        Self {
            use_negatives: false,
            use_mhnl: false,
            use_dmcl: false,
        }
    }
}

/// Stable log-sum-exp with max shift; fixed summation order.
pub fn logsumexp(xs: &[f64]) -> f64 {
    debug_assert!(!xs.is_empty());
    let mut max = f64::NEG_INFINITY;
    for &x in xs {
        if x > max {
            max = x;
        }
    }
    let mut sum = 0.0;
    for &x in xs {
        sum += (x - max).exp();
    }
    max + sum.ln()
}

/// The naive form `−log(1 / Σ exp(s))`; kept as the second route of the
/// kernel identity check, not used by the losses themselves.
pub fn neg_log_inv_sum_exp(xs: &[f64]) -> f64 {
    debug_assert!(!xs.is_empty());
    let mut sum = 0.0;
    for &x in xs {
        sum += x.exp();
    }
    -(1.0 / sum).ln()
}

fn softmax_from_logits(logits: &[f64]) -> (f64, Vec<f64>) {
    let lse = logsumexp(logits);
    let probs = logits.iter().map(|&z| (z - lse).exp()).collect();
    (lse, probs)
}

struct CosineCache {
    value: f64,
    d_a: Vec<f64>,
    d_b: Vec<f64>,
}

fn cosine_cache(a: &[f64], b: &[f64]) -> Result<CosineCache> {
    let (value, d_a, d_b) = cosine_with_grad(a, b)?;
    Ok(CosineCache { value, d_a, d_b })
}

/// Symmetric InfoNCE over the N×N cosine matrix, summed over both the
/// text→image and image→text directions (a sum over samples, not a mean).
/// When `with_negatives` is set, each image's candidate set additionally
/// contains that sample's textual hard negatives.
fn contrastive_impl(batch: &BatchTensors, with_negatives: bool) -> Result<(f64, BatchGrads)> {
    batch.validate()?;
    let n = batch.batch_size();
    let k = batch.slots();
    let tau = batch.tau;
    let mut grads = BatchGrads::zeros_like(batch);

    // Pairwise cosines with cached per-pair gradients.
    let mut sim: Vec<Vec<CosineCache>> = (0..n).map(|_| Vec::with_capacity(n)).collect();
    for i in 0..n {
        for j in 0..n {
            sim[i].push(cosine_cache(&batch.text[i], &batch.image[j])?);
        }
    }
    // Hard-negative candidates for each image (image→text direction only).
    let mut neg_sim: Vec<Vec<CosineCache>> = Vec::with_capacity(n);
    if with_negatives {
        for j in 0..n {
            let mut per_image = Vec::with_capacity(k);
            for slot in 0..k {
                per_image.push(cosine_cache(&batch.text_neg[j][slot], &batch.image[j])?);
            }
            neg_sim.push(per_image);
        }
    }

    let mut loss = 0.0;
    // Text→image direction: softmax over images for each text row.
    for i in 0..n {
        let logits: Vec<f64> = (0..n).map(|j| sim[i][j].value / tau).collect();
        let (lse, probs) = softmax_from_logits(&logits);
        loss += lse - logits[i];
        for j in 0..n {
            let coeff = (probs[j] - if i == j { 1.0 } else { 0.0 }) / tau;
            let pair = &sim[i][j];
            for d in 0..batch.dim() {
                grads.d_text[i][d] += coeff * pair.d_a[d];
                grads.d_image[j][d] += coeff * pair.d_b[d];
            }
        }
    }
    // Image→text direction: softmax over texts (plus that image's
    // hard-negative captions when enabled) for each image column.
    for j in 0..n {
        let mut logits: Vec<f64> = (0..n).map(|i| sim[i][j].value / tau).collect();
        if with_negatives {
            for slot in 0..k {
                logits.push(neg_sim[j][slot].value / tau);
            }
        }
        let (lse, probs) = softmax_from_logits(&logits);
        loss += lse - logits[j];
        for i in 0..n {
            let coeff = (probs[i] - if i == j { 1.0 } else { 0.0 }) / tau;
            let pair = &sim[i][j];
            for d in 0..batch.dim() {
                grads.d_text[i][d] += coeff * pair.d_a[d];
                grads.d_image[j][d] += coeff * pair.d_b[d];
            }
        }
        if with_negatives {
            for slot in 0..k {
                let coeff = probs[n + slot] / tau;
                let pair = &neg_sim[j][slot];
                for d in 0..batch.dim() {
                    grads.d_text_neg[j][slot][d] += coeff * pair.d_a[d];
                    grads.d_image[j][d] += coeff * pair.d_b[d];
                }
            }
        }
    }
    Ok((loss, grads))
}

/// Plain symmetric InfoNCE (no extra candidates).
pub fn contrastive_loss(batch: &BatchTensors) -> Result<(f64, BatchGrads)> {
    contrastive_impl(batch, false)
}

/// InfoNCE with each sample's textual hard negatives as additional
/// candidates in the image→text denominator.
pub fn contrastive_loss_with_negatives(batch: &BatchTensors) -> Result<(f64, BatchGrads)> {
    contrastive_impl(batch, true)
}

enum NegativeSide {
    Visual,
    Textual,
}

/// Shared kernel for the two hard-negative suppression terms: per sample,
/// `logsumexp` of the cosines to that sample's negatives, summed over the
/// batch. Identical to `−log(1/Σ exp(s))` evaluated stably.
fn negative_impl(batch: &BatchTensors, side: NegativeSide) -> Result<(f64, BatchGrads)> {
    batch.validate()?;
    let n = batch.batch_size();
    let k = batch.slots();
    let mut grads = BatchGrads::zeros_like(batch);
    if k == 0 {
        return Ok((0.0, grads));
    }
    let mut loss = 0.0;
    for i in 0..n {
        let mut pairs = Vec::with_capacity(k);
        for slot in 0..k {
            let pair = match side {
                NegativeSide::Visual => {
                    cosine_cache(&batch.image[i], &batch.visual_neg[i][slot])?
                }
                NegativeSide::Textual => {
                    cosine_cache(&batch.text[i], &batch.text_neg[i][slot])?
                }
            };
            pairs.push(pair);
        }
        let logits: Vec<f64> = pairs.iter().map(|p| p.value).collect();
        let (lse, weights) = softmax_from_logits(&logits);
        loss += lse;
        for slot in 0..k {
            let w = weights[slot];
            let pair = &pairs[slot];
            match side {
                NegativeSide::Visual => {
                    for d in 0..batch.dim() {
                        grads.d_image[i][d] += w * pair.d_a[d];
                        grads.d_visual_neg[i][slot][d] += w * pair.d_b[d];
                    }
                }
                NegativeSide::Textual => {
                    for d in 0..batch.dim() {
                        grads.d_text[i][d] += w * pair.d_a[d];
                        grads.d_text_neg[i][slot][d] += w * pair.d_b[d];
                    }
                }
            }
        }
    }
    Ok((loss, grads))
}

/// Suppresses similarity between each image and its synthesized visual
/// negatives.
pub fn visual_negative_loss(batch: &BatchTensors) -> Result<(f64, BatchGrads)> {
    negative_impl(batch, NegativeSide::Visual)
}

/// Suppresses similarity between each caption and its textual hard
/// negatives.
pub fn textual_negative_loss(batch: &BatchTensors) -> Result<(f64, BatchGrads)> {
    negative_impl(batch, NegativeSide::Textual)
}

/// Sum of the visual and textual negative terms; gradients add elementwise.
pub fn negative_loss(batch: &BatchTensors) -> Result<(f64, BatchGrads)> {
    let (lv, gv) = visual_negative_loss(batch)?;
    let (lt, gt) = textual_negative_loss(batch)?;
    let mut grads = gv;
    grads.add_assign(&gt);
    Ok((lv + lt, grads))
}

/// `Σ max(0, a − S(I,T))` over the batch. The subgradient at an exactly-zero
/// hinge is 0 (inactive side), so `∂/∂a` counts strictly active hinges.
pub fn positive_margin_loss(
    batch: &BatchTensors,
    state: &MarginState,
) -> Result<(f64, BatchGrads)> {
    batch.validate()?;
    let n = batch.batch_size();
    let mut grads = BatchGrads::zeros_like(batch);
    let mut loss = 0.0;
    for i in 0..n {
        let pair = cosine_cache(&batch.image[i], &batch.text[i])?;
        let margin = state.a - pair.value;
        if margin > 0.0 {
            loss += margin;
            grads.d_a += 1.0;
            for d in 0..batch.dim() {
                grads.d_image[i][d] -= pair.d_a[d];
                grads.d_text[i][d] -= pair.d_b[d];
            }
        }
    }
    Ok((loss, grads))
}

/// `Σ_(I,T) Σ_n max(0, S(I,T_n) − S(I,T) + M_n)` with per-slot adaptive
/// thresholds; textual negatives only, compared image-to-negative-text.
pub fn negative_margin_loss(
    batch: &BatchTensors,
    state: &MarginState,
) -> Result<(f64, BatchGrads)> {
    batch.validate()?;
    let n = batch.batch_size();
    let k = batch.slots();
    if k > state.thresholds.len() {
        return Err(Error::MissingThreshold {
            slot: state.thresholds.len(),
            have: state.thresholds.len(),
        });
    }
    let mut grads = BatchGrads::zeros_like(batch);
    let mut loss = 0.0;
    for i in 0..n {
        let pos = cosine_cache(&batch.image[i], &batch.text[i])?;
        for slot in 0..k {
            let neg = cosine_cache(&batch.image[i], &batch.text_neg[i][slot])?;
            let arg = neg.value - pos.value + state.thresholds[slot];
            if arg > 0.0 {
                loss += arg;
                for d in 0..batch.dim() {
                    grads.d_image[i][d] += neg.d_a[d] - pos.d_a[d];
                    grads.d_text_neg[i][slot][d] += neg.d_b[d];
                    grads.d_text[i][d] -= pos.d_b[d];
                }
            }
        }
    }
    Ok((loss, grads))
}

/// Sum of the positive and negative margin terms.
pub fn margin_loss(batch: &BatchTensors, state: &MarginState) -> Result<(f64, BatchGrads)> {
    let (lp, gp) = positive_margin_loss(batch, state)?;
    let (ln, gn) = negative_margin_loss(batch, state)?;
    let mut grads = gp;
    grads.add_assign(&gn);
    Ok((lp + ln, grads))
}

/// The full objective `L_cont + L_neg + L_mar` with unit weights; ablation
/// flags zero out terms entirely (value and gradients).
pub fn total_loss(
    batch: &BatchTensors,
    state: &MarginState,
    flags: AblationFlags,
) -> Result<(LossValues, BatchGrads)> {
    let mut grads = BatchGrads::zeros_like(batch);
    let mut values = LossValues::default();

    let (l_cont, g_cont) = if flags.use_negatives {
        contrastive_loss_with_negatives(batch)?
    } else {
        contrastive_loss(batch)?
    };
    values.l_cont = l_cont;
    grads.add_assign(&g_cont);

    if flags.use_mhnl {
        let (lv, gv) = visual_negative_loss(batch)?;
        let (lt, gt) = textual_negative_loss(batch)?;
        values.l_neg_visual = lv;
        values.l_neg_textual = lt;
        grads.add_assign(&gv);
        grads.add_assign(&gt);
    }
    values.l_neg = values.l_neg_visual + values.l_neg_textual;

    if flags.use_dmcl {
        let (lp, gp) = positive_margin_loss(batch, state)?;
        let (ln, gn) = negative_margin_loss(batch, state)?;
        values.l_mar_pos = lp;
        values.l_mar_neg = ln;
        grads.add_assign(&gp);
        grads.add_assign(&gn);
    }
    values.l_mar = values.l_mar_pos + values.l_mar_neg;

    values.l_total = values.l_cont + values.l_neg + values.l_mar;
    if !values.l_total.is_finite() {
        return Err(Error::NonFinite("total loss".into()));
    }
    Ok((values, grads))
}

/// Batch-mean `S(I,T)` and per-slot batch-mean `S(I,T_n)` — the quantities
/// the threshold update consumes on the following step.
pub fn batch_mean_similarities(batch: &BatchTensors) -> Result<(f64, Vec<f64>)> {
    batch.validate()?;
    let n = batch.batch_size();
    let k = batch.slots();
    let mut sum_pos = 0.0;
    let mut sum_neg = vec![0.0; k];
    for i in 0..n {
        sum_pos += cosine_of(&batch.image[i], &batch.text[i])?;
        for slot in 0..k {
            sum_neg[slot] += cosine_of(&batch.image[i], &batch.text_neg[i][slot])?;
        }
    }
    let inv = 1.0 / n as f64;
    Ok((sum_pos * inv, sum_neg.iter().map(|s| s * inv).collect()))
}

fn cosine_of(a: &[f64], b: &[f64]) -> Result<f64> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(dot(a, b) / (na * nb))
}

/// Which loss a caller wants evaluated or checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LossKind {
    Contrastive,
    ContrastiveWithNegatives,
    VisualNegative,
    TextualNegative,
    Negative,
    MarginPositive,
    MarginNegative,
    Margin,
    Total,
}

impl LossKind {
    pub const ALL: [LossKind; 9] = [
        LossKind::Contrastive,
        LossKind::ContrastiveWithNegatives,
        LossKind::VisualNegative,
        LossKind::TextualNegative,
        LossKind::Negative,
        LossKind::MarginPositive,
        LossKind::MarginNegative,
        LossKind::Margin,
        LossKind::Total,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Contrastive => "contrastive",
            LossKind::ContrastiveWithNegatives => "contrastive_with_negatives",
            LossKind::VisualNegative => "visual_negative",
            LossKind::TextualNegative => "textual_negative",
            LossKind::Negative => "negative",
            LossKind::MarginPositive => "margin_positive",
            LossKind::MarginNegative => "margin_negative",
            LossKind::Margin => "margin",
            LossKind::Total => "total",
        }
    }
}

/// Dispatches to a single loss term, returning its value and gradients.
pub fn eval_loss(
    kind: LossKind,
    batch: &BatchTensors,
    state: &MarginState,
    flags: AblationFlags,
) -> Result<(f64, BatchGrads)> {
    match kind {
        LossKind::Contrastive => contrastive_loss(batch),
        LossKind::ContrastiveWithNegatives => contrastive_loss_with_negatives(batch),
        LossKind::VisualNegative => visual_negative_loss(batch),
        LossKind::TextualNegative => textual_negative_loss(batch),
        LossKind::Negative => negative_loss(batch),
        LossKind::MarginPositive => positive_margin_loss(batch, state),
        LossKind::MarginNegative => negative_margin_loss(batch, state),
        LossKind::Margin => margin_loss(batch, state),
        LossKind::Total => {
            let (values, grads) = total_loss(batch, state, flags)?;
            Ok((values.l_total, grads))
        }
    }
}

/// Forward value plus the activity pattern of every hinge the loss touches
/// (positive hinges first, then negative hinges row-major). Finite-difference
/// checks use the pattern to detect probes that straddle a kink.
pub fn loss_value_and_hinges(
    kind: LossKind,
    batch: &BatchTensors,
    state: &MarginState,
    flags: AblationFlags,
) -> Result<(f64, Vec<bool>)> {
    let mut hinges = Vec::new();
    let involves_margin = matches!(
        kind,
        LossKind::MarginPositive | LossKind::MarginNegative | LossKind::Margin
    ) || (kind == LossKind::Total && flags.use_dmcl);
    if involves_margin {
        let n = batch.batch_size();
        let k = batch.slots();
        let include_pos = kind != LossKind::MarginNegative;
        let include_neg = kind != LossKind::MarginPositive;
        for i in 0..n {
            let s_pos = cosine_of(&batch.image[i], &batch.text[i])?;
            if include_pos {
                hinges.push(state.a - s_pos > 0.0);
            }
            if include_neg {
                for slot in 0..k {
                    let s_neg = cosine_of(&batch.image[i], &batch.text_neg[i][slot])?;
                    hinges.push(s_neg - s_pos + state.thresholds[slot] > 0.0);
                }
            }
        }
    }
    let (value, _) = eval_loss(kind, batch, state, flags)?;
    Ok((value, hinges))
}
