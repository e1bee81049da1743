//! Central-finite-difference verification of the analytic parameter
//! gradients, per loss term.
//!
//! Every parameter coordinate (encoder weights plus the margin parameter
//! `a`) is probed at ±ε and compared against the analytic gradient. Probes
//! whose two evaluations disagree on any hinge's activity straddle a kink,
//! where a hinge loss is not differentiable; those coordinates are excluded
//! from the error statistic and counted separately.

use rand::seq::SliceRandom;

use crate::encoders::EncoderParams;
use crate::error::{Error, Result};
use crate::losses::{LossKind, MarginState};
use crate::pipeline::{self, BatchInputs, PipelineConfig};
use crate::rng::substream;

/// Relative error floor: coordinates whose analytic and numeric gradients
/// are both below this magnitude are compared at this scale, since central
/// differences cannot resolve 1e-6 relative error on near-zero gradients.
pub const REL_DENOMINATOR_FLOOR: f64 = 1e-2;

/// Probe settings for one check run.
#[derive(Debug, Clone)]
pub struct GradCheckSettings {
    /// Central-difference step; must lie in `[1e-7, 1e-3]`.
    pub epsilon: f64,
    /// Check at most this many coordinates (seeded random subset) when the
    /// parameter count exceeds it; `None` checks everything.
    pub max_coords: Option<usize>,
    /// Seed for the coordinate subset draw.
    pub seed: u64,
    /// Deliberate corruption `(flat index, offset)` added to the analytic
    /// gradient before comparison; the sensitivity canary.
    pub corrupt: Option<(usize, f64)>,
}

impl Default for GradCheckSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            max_coords: None,
            seed: 0,
            corrupt: None,
        }
    }
}

/// Outcome of checking one loss term.
#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub loss: LossKind,
    pub max_rel_error: f64,
    pub worst_coordinate: Option<String>,
    pub checked: usize,
    pub skipped_kinks: usize,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{:<28} max_rel_err={:>12.3e}  checked={:<5} kinks={:<3} {}",
            self.loss.name(),
            self.max_rel_error,
            self.checked,
            self.skipped_kinks,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

/// Checks one loss term's analytic gradient against central differences.
pub fn finite_difference_check(
    kind: LossKind,
    params: &EncoderParams,
    inputs: &BatchInputs,
    state: &MarginState,
    cfg: &PipelineConfig,
    settings: &GradCheckSettings,
    tolerance: f64,
) -> Result<GradCheckReport> {
    if !(1e-7..=1e-3).contains(&settings.epsilon) {
        return Err(Error::Config(format!(
            "epsilon {} outside [1e-7, 1e-3]",
            settings.epsilon
        )));
    }
    let eps = settings.epsilon;
    let (_, grads) = pipeline::loss_with_param_grads(kind, params, inputs, state, cfg)?;
    let mut analytic = grads.flatten();
    if let Some((idx, offset)) = settings.corrupt {
        if idx < analytic.len() {
            analytic[idx] += offset;
        }
    }

    let flat = params.flatten();
    let coord_count = flat.len() + 1; // `a` is the trailing coordinate
    let mut coords: Vec<usize> = (0..coord_count).collect();
    if let Some(max) = settings.max_coords {
        if coord_count > max {
            let mut rng = substream(settings.seed, "gradcheck-coords");
            coords.shuffle(&mut rng);
            coords.truncate(max);
            coords.sort_unstable();
        }
    }

    let evaluate = |p: &EncoderParams, s: &MarginState| -> Result<(f64, Vec<bool>)> {
        pipeline::loss_value(kind, p, inputs, s, cfg)
    };

    let mut max_rel_error = 0.0_f64;
    let mut worst = None;
    let mut checked = 0;
    let mut skipped_kinks = 0;
    let mut scratch = params.clone();
    for &c in &coords {
        let (plus, minus, hinges_plus, hinges_minus) = if c < flat.len() {
            let mut v = flat.clone();
            v[c] += eps;
            scratch.assign_flat(&v)?;
            let (fp, hp) = evaluate(&scratch, state)?;
            v[c] -= 2.0 * eps;
            scratch.assign_flat(&v)?;
            let (fm, hm) = evaluate(&scratch, state)?;
            (fp, fm, hp, hm)
        } else {
            let mut sp = state.clone();
            sp.a += eps;
            let (fp, hp) = evaluate(params, &sp)?;
            let mut sm = state.clone();
            sm.a -= eps;
            let (fm, hm) = evaluate(params, &sm)?;
            (fp, fm, hp, hm)
        };
        if hinges_plus != hinges_minus {
            skipped_kinks += 1;
            continue;
        }
        let fd = (plus - minus) / (2.0 * eps);
        let a = analytic[c];
        let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(REL_DENOMINATOR_FLOOR);
        checked += 1;
        if rel > max_rel_error {
            max_rel_error = rel;
            worst = Some(if c < flat.len() {
                params.coord_name(c)
            } else {
                "a".to_string()
            });
        }
    }

    Ok(GradCheckReport {
        loss: kind,
        max_rel_error,
        worst_coordinate: worst,
        checked,
        skipped_kinks,
        tolerance,
        passed: max_rel_error < tolerance,
    })
}

/// The standard desk-scale check case: 4 samples, 2 negative slots,
/// 8-dimensional embeddings, position-gated text encoder, margin state with
/// a mix of active and inactive hinges.
pub fn standard_check_case(seed: u64) -> (EncoderParams, BatchInputs, MarginState) {
    use rand::Rng;
    let cfg = crate::encoders::EncoderConfig {
        vocab_size: 13,
        hidden_dim: 4,
        embed_dim: 8,
        feature_dim: 6,
        max_len: 6,
        variant: crate::encoders::TextEncoderVariant::PositionGated,
    };
    let mut rng = substream(seed, "gradcheck-case");
    let params = EncoderParams::init(cfg, &mut rng).expect("valid check config");
    let mut cap = |len: usize| -> Vec<usize> {
        (0..len).map(|_| rng.random_range(0..cfg.vocab_size)).collect()
    };
    let captions: Vec<_> = (0..4).map(|_| cap(4)).collect();
    let negatives: Vec<Vec<_>> = (0..4).map(|_| (0..2).map(|_| cap(4)).collect()).collect();
    let features: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..cfg.feature_dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let mut state = MarginState::with_a(0.45, 2);
    state.thresholds = vec![0.08, -0.03];
    (
        params,
        BatchInputs {
            captions,
            features,
            negatives,
        },
        state,
    )
}

/// Runs the check for every loss term.
pub fn check_all_losses(
    params: &EncoderParams,
    inputs: &BatchInputs,
    state: &MarginState,
    cfg: &PipelineConfig,
    settings: &GradCheckSettings,
    tolerance: f64,
) -> Result<Vec<GradCheckReport>> {
    LossKind::ALL
        .iter()
        .map(|&kind| finite_difference_check(kind, params, inputs, state, cfg, settings, tolerance))
        .collect()
}
