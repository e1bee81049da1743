//! Acceptance suite: one test per release criterion, each printing a
//! PASS line with its measured numbers (run with `--nocapture` to see them).
//!
//! Covers closed-form loss values, the gradient suite, the logsumexp kernel
//! identity, perturbation structure, negative-generation invariants, the
//! directional ablation, the adaptive-threshold protocol, clamp and
//! determinism, the untrained baseline, and preset fidelity.

#![allow(clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::time::Instant;

use ahnpl_core::embedding::{cosine_similarity, l2_normalize, similarity_matrix, EmbeddingVector};
use ahnpl_core::encoders::{EncoderConfig, EncoderParams, Vocab};
use ahnpl_core::eval::{self, BenchmarkItem};
use ahnpl_core::gradcheck::{finite_difference_check, GradCheckSettings};
use ahnpl_core::losses::{
    self, logsumexp, neg_log_inv_sum_exp, AblationFlags, BatchTensors, LossKind, MarginState,
    A_MIN,
};
use ahnpl_core::pipeline::{self, PipelineConfig};
use ahnpl_core::rng::{substream, substream_for};
use ahnpl_core::synth::{self, Category, SynthConfig};
use ahnpl_core::textgen::{generate_negative_set, NegativeKind};
use ahnpl_core::trainer::{self, OptimizerState, TrainConfig, TrainSample};

use rand::Rng;

const TOL: f64 = 1e-12;

fn angle_vec(cos: f64) -> Vec<f64> {
    vec![cos, (1.0 - cos * cos).sqrt()]
}

/// Single-pair batch with prescribed cosines (image is the x-axis unit
/// vector, every other embedding a unit vector at the requested angle).
fn pair_batch(s_pos: f64, text_neg_sims: &[f64], visual_sims: &[f64]) -> BatchTensors {
    let k = text_neg_sims.len().max(visual_sims.len());
    let to_vecs = |sims: &[f64]| -> Vec<Vec<f64>> {
        (0..k)
            .map(|i| angle_vec(sims.get(i).copied().unwrap_or(0.0)))
            .collect()
    };
    BatchTensors::new(
        vec![angle_vec(s_pos)],
        vec![vec![1.0, 0.0]],
        vec![to_vecs(text_neg_sims)],
        vec![to_vecs(visual_sims)],
        1.0,
    )
    .unwrap()
}

/// Full synthetic dataset for one seed: joined train samples, benchmark
/// items, and the vocabulary.
fn build_dataset(
    seed: u64,
    synth_cfg: &SynthConfig,
    k_per_kind: usize,
) -> (Vec<TrainSample>, Vec<BenchmarkItem>, Vocab) {
    let lexicon = synth::build_lexicon(synth_cfg.sizes).unwrap();
    let vocab = Vocab::from_lexicon(&lexicon);
    let mut data_rng = substream(seed, "data");
    let pairs = synth::build_train_corpus(synth_cfg, &mut data_rng).unwrap();
    let bench_items = synth::build_benchmark(synth_cfg, &Category::ALL, &mut data_rng).unwrap();
    let benchmark: Vec<BenchmarkItem> = bench_items.iter().map(BenchmarkItem::from).collect();

    let captions: Vec<(String, Vec<String>)> = pairs
        .iter()
        .map(|p| (p.id.clone(), p.caption.tokens.clone()))
        .collect();
    let features: Vec<(String, Vec<f64>)> = pairs
        .iter()
        .map(|p| (p.id.clone(), p.features.clone()))
        .collect();
    let mut negatives: BTreeMap<String, Vec<Vec<String>>> = BTreeMap::new();
    for pair in &pairs {
        let mut rng = substream_for(seed, "negatives", &pair.id);
        let set = generate_negative_set(&pair.caption, k_per_kind, &lexicon, &mut rng).unwrap();
        if !set.is_empty() {
            negatives.insert(
                pair.id.clone(),
                set.negatives
                    .iter()
                    .map(|n| n.caption.tokens.clone())
                    .collect(),
            );
        }
    }
    let samples = trainer::samples_from_parts(&captions, &features, &negatives, &vocab).unwrap();
    (samples, benchmark, vocab)
}

use ahnpl_core::gradcheck::standard_check_case as gradient_case;

#[test]
fn criterion_01_closed_form_losses() {
    let start = Instant::now();

    // Normalization and cosine primitives.
    let v = l2_normalize(&EmbeddingVector::new(vec![3.0, 4.0]).unwrap()).unwrap();
    assert_eq!(v.values(), &[0.6, 0.8]);
    let unit = l2_normalize(&EmbeddingVector::new(vec![1.0, 0.0]).unwrap()).unwrap();
    assert_eq!(unit.values(), &[1.0, 0.0]);
    assert!(l2_normalize(&EmbeddingVector::new(vec![0.0, 0.0]).unwrap()).is_err());
    let ev = |v: &[f64]| EmbeddingVector::new(v.to_vec()).unwrap();
    assert_eq!(cosine_similarity(&ev(&[1.0, 0.0]), &ev(&[1.0, 0.0])).unwrap(), 1.0);
    assert_eq!(cosine_similarity(&ev(&[1.0, 0.0]), &ev(&[0.0, 1.0])).unwrap(), 0.0);
    let c = cosine_similarity(&ev(&[1.0, 2.0, 2.0]), &ev(&[2.0, 1.0, 2.0])).unwrap();
    assert!((c - 8.0 / 9.0).abs() <= TOL);
    let texts = [ev(&[0.2, -1.0, 0.5]), ev(&[1.1, 0.3, -0.7]), ev(&[-0.4, 0.8, 1.6])];
    let images = [ev(&[0.9, 0.1, -0.2]), ev(&[-0.6, 0.5, 0.4]), ev(&[1.5, -0.9, 0.2])];
    let m = similarity_matrix(&texts, &images).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            assert_eq!(m.get(i, j), cosine_similarity(&texts[i], &images[j]).unwrap());
        }
    }

    // Contrastive closed forms.
    let (single, _) = losses::contrastive_loss(&pair_batch(0.37, &[], &[])).unwrap();
    assert_eq!(single, 0.0, "N = 1 contrastive is exactly zero");
    let identity = BatchTensors::new(
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        vec![vec![], vec![]],
        vec![vec![], vec![]],
        1.0,
    )
    .unwrap();
    let (loss, _) = losses::contrastive_loss(&identity).unwrap();
    let e = std::f64::consts::E;
    assert!((loss - 4.0 * ((e + 1.0).ln() - 1.0)).abs() <= TOL);
    for n in [2usize, 3, 5] {
        let row = vec![0.6, 0.8];
        let all_equal = BatchTensors::new(
            vec![row.clone(); n],
            vec![row.clone(); n],
            vec![vec![]; n],
            vec![vec![]; n],
            1.0,
        )
        .unwrap();
        let (loss, _) = losses::contrastive_loss(&all_equal).unwrap();
        assert!((loss - 2.0 * n as f64 * (n as f64).ln()).abs() <= TOL);
    }

    // Hard-negative suppression closed forms (shared logsumexp kernel).
    let (l, _) = losses::visual_negative_loss(&pair_batch(0.9, &[0.0], &[0.5])).unwrap();
    assert!((l - 0.5).abs() <= TOL);
    let (l, _) = losses::visual_negative_loss(&pair_batch(0.9, &[0.0; 2], &[0.0; 2])).unwrap();
    assert!((l - 2.0f64.ln()).abs() <= TOL);
    let (l, _) = losses::visual_negative_loss(&pair_batch(0.9, &[0.0; 2], &[0.2, 0.8])).unwrap();
    assert!((l - (0.2f64.exp() + 0.8f64.exp()).ln()).abs() <= TOL);
    let textual = BatchTensors::new(
        vec![vec![1.0, 0.0]],
        vec![vec![1.0, 0.0]],
        vec![vec![angle_vec(-0.3)]],
        vec![vec![angle_vec(0.0)]],
        1.0,
    )
    .unwrap();
    let (l, _) = losses::textual_negative_loss(&textual).unwrap();
    assert!((l + 0.3).abs() <= TOL, "single textual negative at -0.3");

    // Additivity of the combined negative loss: 0.5 + 0.7 = 1.2.
    let combined = BatchTensors::new(
        vec![vec![1.0, 0.0]],
        vec![vec![1.0, 0.0]],
        vec![vec![angle_vec(0.7)]],
        vec![vec![angle_vec(0.5)]],
        1.0,
    )
    .unwrap();
    let (lv, gv) = losses::visual_negative_loss(&combined).unwrap();
    let (lt, gt) = losses::textual_negative_loss(&combined).unwrap();
    let (ln, gn) = losses::negative_loss(&combined).unwrap();
    assert!((lv - 0.5).abs() <= TOL && (lt - 0.7).abs() <= TOL);
    assert!((ln - 1.2).abs() <= TOL);
    let mut expected = gv.clone();
    expected.add_assign(&gt);
    assert_eq!(gn, expected, "negative-loss gradients add elementwise");

    // Margin closed forms.
    let state = MarginState::with_a(0.2, 0);
    let (l, g) = losses::positive_margin_loss(&pair_batch(0.9, &[], &[]), &state).unwrap();
    assert_eq!((l, g.d_a), (0.0, 0.0));
    let state = MarginState::with_a(0.5, 0);
    let (l, g) = losses::positive_margin_loss(&pair_batch(0.2, &[], &[]), &state).unwrap();
    assert!((l - 0.3).abs() <= TOL);
    assert_eq!(g.d_a, 1.0);
    let two = BatchTensors::new(
        vec![angle_vec(0.1), angle_vec(0.6)],
        vec![vec![1.0, 0.0], vec![1.0, 0.0]],
        vec![vec![], vec![]],
        vec![vec![], vec![]],
        1.0,
    )
    .unwrap();
    let (l, _) = losses::positive_margin_loss(&two, &state).unwrap();
    assert!((l - 0.4).abs() <= TOL);

    let mut mstate = MarginState::with_a(0.5, 1);
    mstate.thresholds = vec![0.1];
    let (l, _) = losses::negative_margin_loss(&pair_batch(0.8, &[0.3], &[0.0]), &mstate).unwrap();
    assert_eq!(l, 0.0);
    mstate.thresholds = vec![0.2];
    let (l, _) = losses::negative_margin_loss(&pair_batch(0.6, &[0.7], &[0.0]), &mstate).unwrap();
    assert!((l - 0.3).abs() <= TOL);

    // Adaptive threshold closed forms.
    let mut state = MarginState::with_a(0.5, 1);
    state.cache_similarities((0.8 + 0.6) / 2.0, vec![(0.3 + 0.5) / 2.0]);
    state.update_adaptive_thresholds(1);
    assert!((state.thresholds[0] - 0.3).abs() <= TOL, "two-sample mean is 0.3");
    let mut state = MarginState::with_a(0.5, 1);
    state.cache_similarities(0.42, vec![0.42]);
    state.update_adaptive_thresholds(1);
    assert_eq!(state.thresholds[0], 0.0);

    // Composition identities on a nontrivial batch.
    assert!((1.0 + 0.5 + 0.25 - 1.75f64).abs() <= TOL);
    let batch = pair_batch(0.4, &[0.3, -0.2], &[0.6, 0.1]);
    let mut state = MarginState::with_a(0.5, 2);
    state.thresholds = vec![0.1, 0.1];
    let (values, _) = losses::total_loss(&batch, &state, AblationFlags::default()).unwrap();
    assert_eq!(values.l_neg, values.l_neg_visual + values.l_neg_textual);
    assert_eq!(values.l_mar, values.l_mar_pos + values.l_mar_neg);
    assert_eq!(values.l_total, values.l_cont + values.l_neg + values.l_mar);

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 1.0, "criterion 1 must run in < 1 s");
    println!(
        "[criterion 1] PASS — closed-form loss values match to 1e-12 ({} ms)",
        elapsed.as_millis()
    );
}

#[test]
fn criterion_02_gradient_suite() {
    let start = Instant::now();
    let kinds = [
        LossKind::Contrastive,
        LossKind::ContrastiveWithNegatives,
        LossKind::VisualNegative,
        LossKind::TextualNegative,
        LossKind::MarginPositive,
        LossKind::MarginNegative,
        LossKind::Total,
    ];
    let mut worst: f64 = 0.0;
    let mut coords = 0;
    for seed in [5u64, 17] {
        let (params, inputs, state) = gradient_case(seed);
        for tau in [0.07, 0.5] {
            let cfg = PipelineConfig {
                tau,
                ..PipelineConfig::default()
            };
            for kind in kinds {
                let report = finite_difference_check(
                    kind,
                    &params,
                    &inputs,
                    &state,
                    &cfg,
                    &GradCheckSettings::default(),
                    1e-6,
                )
                .unwrap();
                assert!(
                    report.passed,
                    "seed {seed} tau {tau}: {}",
                    report.summary_line()
                );
                assert!(report.checked > 0);
                worst = worst.max(report.max_rel_error);
                coords += report.checked;
            }
        }
        // ∂/∂a is genuinely exercised: at a = 0.45 some hinges are active.
        let (_, grads) = pipeline::loss_with_param_grads(
            LossKind::MarginPositive,
            &params,
            &inputs,
            &state,
            &PipelineConfig::default(),
        )
        .unwrap();
        assert!(grads.a > 0.0, "positive-margin ∂/∂a counts active hinges");
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "criterion 2 must run in < 60 s");
    println!(
        "[criterion 2] PASS — analytic gradients within 1e-6 of central differences \
         (worst {:.3e} over {} coordinates, {:.1} s)",
        worst,
        coords,
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_03_logsumexp_identity() {
    let mut rng = substream(31, "acceptance-lse");
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let len = rng.random_range(1..=8);
        let values: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let diff = (logsumexp(&values) - neg_log_inv_sum_exp(&values)).abs();
        worst = worst.max(diff);
        assert!(diff <= 1e-12, "kernel identity violated: {diff}");
    }
    println!(
        "[criterion 3] PASS — stable and naive evaluation agree on 1000 random sets \
         (worst |diff| {worst:.3e})"
    );
}

#[test]
fn criterion_04_structural_invariants() {
    let synth_cfg = SynthConfig {
        train_pairs: 160,
        ..SynthConfig::default()
    };
    let desk = TrainConfig::desk();
    let (samples, _, _) = build_dataset(41, &synth_cfg, desk.k_per_kind);
    let kept: Vec<&TrainSample> = samples.iter().filter(|s| !s.negative_ids.is_empty()).collect();
    let cfg = EncoderConfig {
        vocab_size: 19,
        hidden_dim: desk.hidden_dim,
        embed_dim: desk.embed_dim,
        feature_dim: kept[0].features.len(),
        max_len: desk.max_len,
        variant: desk.variant,
    };
    let params = EncoderParams::init(cfg, &mut substream(41, "init")).unwrap();
    let mut batches = 0;
    let mut slots_checked = 0;
    for chunk in kept.chunks(desk.batch_size) {
        let inputs = trainer::assemble_batch(chunk, desk.negative_slots).unwrap();
        let assembled = pipeline::forward(&params, &inputs, desk.tau).unwrap();
        let t = &assembled.tensors;
        for i in 0..t.batch_size() {
            // Slot bijection between textual and visual negative sets.
            assert_eq!(t.text_neg[i].len(), desk.negative_slots);
            assert_eq!(t.visual_neg[i].len(), desk.negative_slots);
            for slot in 0..desk.negative_slots {
                for d in 0..t.dim() {
                    let delta = t.text_neg[i][slot][d] - t.text[i][d];
                    assert_eq!(
                        t.visual_neg[i][slot][d],
                        t.image[i][d] + delta,
                        "visual negative recomposes bitwise at ({i},{slot},{d})"
                    );
                }
                slots_checked += 1;
            }
        }
        batches += 1;
    }
    println!(
        "[criterion 4] PASS — visual negatives recompose bitwise from image + text deviation \
         across {batches} assembled batches ({slots_checked} slots)"
    );
}

#[test]
fn criterion_05_negative_generation_invariants() {
    let synth_cfg = SynthConfig {
        train_pairs: 10_000,
        ..SynthConfig::default()
    };
    let lexicon = synth::build_lexicon(synth_cfg.sizes).unwrap();
    let mut data_rng = substream(53, "data");
    let pairs = synth::build_train_corpus(&synth_cfg, &mut data_rng).unwrap();
    assert_eq!(pairs.len(), 10_000);
    let (mut swaps, mut subs) = (0usize, 0usize);
    for pair in &pairs {
        let mut rng = substream_for(53, "negatives", &pair.id);
        let set = generate_negative_set(&pair.caption, 2, &lexicon, &mut rng).unwrap();
        let source = &pair.caption;
        let mut seen = std::collections::BTreeSet::new();
        seen.insert(source.tokens.clone());
        for neg in &set.negatives {
            assert!(
                seen.insert(neg.caption.tokens.clone()),
                "duplicate or source-equal negative for {}",
                source.id
            );
            let diff: Vec<usize> = (0..source.len())
                .filter(|&i| source.tokens[i] != neg.caption.tokens[i])
                .collect();
            match neg.kind {
                NegativeKind::NounSwap => {
                    swaps += 1;
                    assert_eq!(diff.len(), 2, "{}: swap must differ in exactly 2", source.id);
                    let mut a = source.tokens.clone();
                    let mut b = neg.caption.tokens.clone();
                    a.sort();
                    b.sort();
                    assert_eq!(a, b, "{}: swap must preserve the multiset", source.id);
                }
                NegativeKind::Substitution => {
                    subs += 1;
                    assert_eq!(diff.len(), 1, "{}: substitution differs in exactly 1", source.id);
                    assert_eq!(
                        neg.caption.tags[diff[0]], source.tags[diff[0]],
                        "{}: substitution must preserve POS",
                        source.id
                    );
                }
            }
        }
    }
    println!(
        "[criterion 5] PASS — 10k-caption corpus: {swaps} noun swaps and {subs} substitutions \
         all satisfy their structural invariants, zero source duplicates"
    );
}

#[test]
fn criterion_06_directional_ablation() {
    let start = Instant::now();
    let configs: [(&str, AblationFlags); 5] = [
        ("contrastive", AblationFlags { use_negatives: false, use_mhnl: false, use_dmcl: false }),
        ("negatives", AblationFlags { use_negatives: true, use_mhnl: false, use_dmcl: false }),
        ("negatives+mhnl", AblationFlags { use_negatives: true, use_mhnl: true, use_dmcl: false }),
        ("negatives+dmcl", AblationFlags { use_negatives: true, use_mhnl: false, use_dmcl: true }),
        ("full", AblationFlags::default()),
    ];
    let synth_cfg = SynthConfig::default();
    let desk = TrainConfig::desk();
    let seeds = [101u64, 202, 303, 404, 505];
    let mut means = [0.0f64; 5];
    for &seed in &seeds {
        let (samples, benchmark, vocab) = build_dataset(seed, &synth_cfg, desk.k_per_kind);
        for (ci, (_, flags)) in configs.iter().enumerate() {
            let config = TrainConfig {
                seed,
                flags: *flags,
                ..desk.clone()
            };
            let outcome = trainer::train(&config, &samples, &benchmark, &vocab).unwrap();
            means[ci] += outcome.report.epoch_evals.last().unwrap().overall_accuracy
                / seeds.len() as f64;
        }
    }
    let elapsed = start.elapsed();
    for ((name, _), mean) in configs.iter().zip(&means) {
        println!("    {name:<16} mean accuracy {mean:.4}");
    }
    assert!(
        means[1] - means[0] >= 0.02,
        "negatives must beat contrastive-only by ≥ 2 points: {:.4} vs {:.4}",
        means[1],
        means[0]
    );
    assert!(
        means[4] >= means[2],
        "full must not regress vs negatives+mhnl: {:.4} vs {:.4}",
        means[4],
        means[2]
    );
    assert!(
        means[4] >= means[3],
        "full must not regress vs negatives+dmcl: {:.4} vs {:.4}",
        means[4],
        means[3]
    );
    assert!(elapsed.as_secs_f64() < 600.0, "criterion 6 must run in < 10 min");
    println!(
        "[criterion 6] PASS — negatives−contrastive = {:+.4}, full−(neg+mhnl) = {:+.4}, \
         full−(neg+dmcl) = {:+.4}, over 5 seeds in {:.1} s",
        means[1] - means[0],
        means[4] - means[2],
        means[4] - means[3],
        elapsed.as_secs_f64()
    );
}

#[test]
fn criterion_07_adaptive_threshold_protocol() {
    let synth_cfg = SynthConfig {
        train_pairs: 64,
        ..SynthConfig::default()
    };
    let desk = TrainConfig::desk();
    let (samples, _, vocab) = build_dataset(61, &synth_cfg, desk.k_per_kind);
    let kept: Vec<&TrainSample> = samples.iter().filter(|s| !s.negative_ids.is_empty()).collect();
    let inputs_a = trainer::assemble_batch(&kept[..8], desk.negative_slots).unwrap();
    // A different batch entirely: other samples and rescaled features.
    let mut inputs_b = trainer::assemble_batch(&kept[8..16], desk.negative_slots).unwrap();
    for f in inputs_b.features.iter_mut().flatten() {
        *f *= 1.7;
    }

    let encoder_config = EncoderConfig {
        vocab_size: vocab.len(),
        hidden_dim: desk.hidden_dim,
        embed_dim: desk.embed_dim,
        feature_dim: kept[0].features.len(),
        max_len: desk.max_len,
        variant: desk.variant,
    };
    let params0 = EncoderParams::init(encoder_config, &mut substream(61, "init")).unwrap();
    let margin0 = {
        let mut m = MarginState::with_a(0.4, desk.negative_slots);
        // A populated cache, as if one step had already run.
        m.cache_similarities(0.62, vec![0.33, 0.41, 0.18, 0.27]);
        m.step = 1;
        m
    };

    let run = |inputs: &pipeline::BatchInputs| {
        let mut params = params0.clone();
        let mut margin = margin0.clone();
        let mut opt = OptimizerState::new(params.param_count() + 1);
        let (record, _) =
            trainer::train_step(inputs, &mut params, &mut margin, &mut opt, &desk).unwrap();
        record
    };
    let rec_a = run(&inputs_a);
    let rec_b = run(&inputs_b);
    assert_eq!(
        rec_a.thresholds, rec_b.thresholds,
        "thresholds at step t must not depend on step-t embeddings"
    );
    let expected: Vec<f64> = vec![0.62 - 0.33, 0.62 - 0.41, 0.62 - 0.18, 0.62 - 0.27];
    for (got, want) in rec_a.thresholds.iter().zip(&expected) {
        assert!((got - want).abs() <= TOL);
    }

    // First step of a fresh state: every threshold is exactly zero.
    let mut params = params0.clone();
    let mut margin = MarginState::with_a(0.4, desk.negative_slots);
    let mut opt = OptimizerState::new(params.param_count() + 1);
    let (first, _) =
        trainer::train_step(&inputs_a, &mut params, &mut margin, &mut opt, &desk).unwrap();
    assert_eq!(first.step, 1);
    assert!(first.thresholds.iter().all(|&m| m == 0.0), "M_n^1 = 0");

    println!(
        "[criterion 7] PASS — step-t thresholds depend only on the step t−1 cache \
         (perturbed batch leaves M^t unchanged) and M^1 = 0"
    );
}

#[test]
fn criterion_08_clamp_and_determinism() {
    let synth_cfg = SynthConfig {
        train_pairs: 600,
        ..SynthConfig::default()
    };
    let desk = TrainConfig {
        epochs: 2,
        ..TrainConfig::desk()
    };
    let (samples, benchmark, vocab) = build_dataset(71, &synth_cfg, desk.k_per_kind);
    let run = || {
        let outcome = trainer::train(&desk, &samples, &benchmark, &vocab).unwrap();
        let csv = ahnpl_core::formats::metrics_csv_string(
            &outcome.report.steps,
            desk.negative_slots,
        );
        (outcome, csv)
    };
    let (outcome_a, csv_a) = run();
    let (outcome_b, csv_b) = run();
    assert_eq!(csv_a, csv_b, "metrics CSVs must be byte-identical across reruns");
    assert_eq!(outcome_a.report.checkpoint_id, outcome_b.report.checkpoint_id);
    let min_a = outcome_a
        .report
        .steps
        .iter()
        .map(|s| s.a)
        .fold(f64::INFINITY, f64::min);
    assert!(min_a >= A_MIN, "a must stay ≥ {A_MIN}, saw {min_a}");
    println!(
        "[criterion 8] PASS — two identical runs produced byte-identical metrics \
         ({} steps) and a ≥ {A_MIN} throughout (min {min_a:.4})",
        outcome_a.report.steps.len()
    );
}

#[test]
fn criterion_09_untrained_baseline() {
    let synth_cfg = SynthConfig::default();
    let desk = TrainConfig::desk();
    let (_, benchmark, vocab) = build_dataset(83, &synth_cfg, desk.k_per_kind);
    assert_eq!(benchmark.len(), 600, "default benchmark has 600 items");
    let encoder_config = EncoderConfig {
        vocab_size: vocab.len(),
        hidden_dim: desk.hidden_dim,
        embed_dim: desk.embed_dim,
        feature_dim: benchmark[0].features.len(),
        max_len: desk.max_len,
        variant: desk.variant,
    };
    let params = EncoderParams::init(encoder_config, &mut substream(83, "init")).unwrap();
    let report = eval::evaluate_choice(&params, &vocab, &benchmark).unwrap();
    let acc = report.overall_accuracy;
    assert!(
        (acc - 0.5).abs() <= 0.05,
        "untrained accuracy {acc:.4} outside 0.50 ± 0.05"
    );
    println!("[criterion 9] PASS — untrained encoders score {acc:.4} on 600 items (0.50 ± 0.05)");
}

#[test]
fn criterion_10_preset_fidelity() {
    let preset = TrainConfig::paper_mscoco();
    let json = serde_json::to_string_pretty(&preset).unwrap();
    let parsed: TrainConfig = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed.batch_size, 128);
    assert_eq!(parsed.learning_rate, 2e-5);
    assert_eq!(parsed.weight_decay, 0.1);
    assert_eq!(parsed.epochs, 10);
    assert_eq!(parsed, preset, "preset serializes and reloads exactly");
    println!(
        "[criterion 10] PASS — paper-mscoco preset serializes batch=128, lr=2e-5, \
         weight_decay=0.1, epochs=10 exactly"
    );
}
