//! Binary-choice evaluation (the model picks whichever caption scores the
//! higher image similarity) and the embedding-distance report.

use serde::{Deserialize, Serialize};

use crate::embedding::{cosine_similarity, EmbeddingVector};
use crate::encoders::{encode_image, encode_text, EncoderParams, Vocab};
use crate::error::{Error, Result};
use crate::perturb;
use crate::synth::ChoiceItem;

/// One benchmark item as loaded from disk: token sequences plus the image
/// feature vector.
#[derive(Debug, Clone)]
pub struct BenchmarkItem {
    pub id: String,
    pub category: String,
    pub positive: Vec<String>,
    pub negative: Vec<String>,
    pub features: Vec<f64>,
}

impl From<&ChoiceItem> for BenchmarkItem {
    fn from(item: &ChoiceItem) -> Self {
        Self {
            id: item.id.clone(),
            category: item.category.as_str().to_string(),
            positive: item.positive.tokens.clone(),
            negative: item.negative.tokens.clone(),
            features: item.features.clone(),
        }
    }
}

/// Cosine similarity between the encoded caption and the encoded image.
pub fn score_pair(
    params: &EncoderParams,
    vocab: &Vocab,
    tokens: &[String],
    features: &[f64],
) -> Result<f64> {
    let ids = vocab.ids_of(tokens)?;
    let text = encode_text(params, &ids)?;
    let image = encode_image(params, features)?;
    cosine_similarity(&text, &image)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryAccuracy {
    pub category: String,
    pub count: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_category: Vec<CategoryAccuracy>,
    pub total: usize,
    pub correct: usize,
    pub overall_accuracy: f64,
    /// Per-item `S(I,T⁺) − S(I,T⁻)`; an item is correct iff its margin is
    /// strictly positive (exact ties count as incorrect).
    pub margins: Vec<(String, f64)>,
}

/// Scores every item; correct iff the true caption's similarity is strictly
/// higher.
pub fn evaluate_choice(
    params: &EncoderParams,
    vocab: &Vocab,
    items: &[BenchmarkItem],
) -> Result<EvalReport> {
    if items.is_empty() {
        return Err(Error::EmptyInput("benchmark items"));
    }
    use std::collections::BTreeMap;
    let mut per: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut margins = Vec::with_capacity(items.len());
    let mut correct_total = 0;
    for item in items {
        let s_pos = score_pair(params, vocab, &item.positive, &item.features)?;
        let s_neg = score_pair(params, vocab, &item.negative, &item.features)?;
        let margin = s_pos - s_neg;
        let correct = margin > 0.0;
        let entry = per.entry(item.category.clone()).or_insert((0, 0));
        entry.0 += 1;
        if correct {
            entry.1 += 1;
            correct_total += 1;
        }
        margins.push((item.id.clone(), margin));
    }
    let per_category = per
        .into_iter()
        .map(|(category, (count, correct))| CategoryAccuracy {
            category,
            count,
            correct,
            accuracy: correct as f64 / count as f64,
        })
        .collect();
    Ok(EvalReport {
        per_category,
        total: items.len(),
        correct: correct_total,
        overall_accuracy: correct_total as f64 / items.len() as f64,
        margins,
    })
}

/// Pairwise cosine distances (1 − cosine similarity) among the four key
/// embeddings of one example; the visual negative is recomputed from the
/// other three at report time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceRow {
    pub id: String,
    pub image_text: f64,
    pub image_text_neg: f64,
    pub image_image_neg: f64,
    pub text_text_neg: f64,
    pub text_image_neg: f64,
    pub text_neg_image_neg: f64,
}

fn distance(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f64> {
    Ok(1.0 - cosine_similarity(a, b)?)
}

pub fn distance_report(
    params: &EncoderParams,
    vocab: &Vocab,
    items: &[BenchmarkItem],
) -> Result<Vec<DistanceRow>> {
    let mut rows = Vec::with_capacity(items.len());
    for item in items {
        let text = encode_text(params, &vocab.ids_of(&item.positive)?)?;
        let text_neg = encode_text(params, &vocab.ids_of(&item.negative)?)?;
        let image = encode_image(params, &item.features)?;
        let delta = perturb::deviation_embedding(&text, &text_neg)?;
        let image_neg = perturb::perturb_image_embedding(&image, &delta)?;
        rows.push(DistanceRow {
            id: item.id.clone(),
            image_text: distance(&image, &text)?,
            image_text_neg: distance(&image, &text_neg)?,
            image_image_neg: distance(&image, &image_neg)?,
            text_text_neg: distance(&text, &text_neg)?,
            text_image_neg: distance(&text, &image_neg)?,
            text_neg_image_neg: distance(&text_neg, &image_neg)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::{EncoderConfig, TextEncoderVariant};
    use crate::rng::substream;
    use crate::synth::{self, Category, SynthConfig};

    fn setup() -> (EncoderParams, Vocab, Vec<BenchmarkItem>) {
        let config = SynthConfig {
            bench_items: 60,
            ..SynthConfig::default()
        };
        let mut rng = substream(23, "data");
        let items = synth::build_benchmark(&config, &Category::ALL, &mut rng).unwrap();
        let lexicon = synth::build_lexicon(config.sizes).unwrap();
        let vocab = Vocab::from_lexicon(&lexicon);
        let encoder_config = EncoderConfig {
            vocab_size: vocab.len(),
            hidden_dim: 8,
            embed_dim: 16,
            feature_dim: config.sizes.feature_dim(),
            max_len: 12,
            variant: TextEncoderVariant::PositionGated,
        };
        let params = EncoderParams::init(encoder_config, &mut substream(23, "init")).unwrap();
        let bench: Vec<BenchmarkItem> = items.iter().map(BenchmarkItem::from).collect();
        (params, vocab, bench)
    }

    #[test]
    fn score_pair_matches_manual_composition() {
        let (params, vocab, bench) = setup();
        let item = &bench[0];
        let got = score_pair(&params, &vocab, &item.positive, &item.features).unwrap();
        let ids = vocab.ids_of(&item.positive).unwrap();
        let text = encode_text(&params, &ids).unwrap();
        let image = encode_image(&params, &item.features).unwrap();
        assert_eq!(got, cosine_similarity(&text, &image).unwrap());
    }

    #[test]
    fn score_is_scale_invariant_in_embedding_space() {
        let (params, vocab, bench) = setup();
        let item = &bench[1];
        let base = score_pair(&params, &vocab, &item.positive, &item.features).unwrap();
        let ids = vocab.ids_of(&item.positive).unwrap();
        let text = encode_text(&params, &ids).unwrap();
        let image = encode_image(&params, &item.features).unwrap();
        let scaled = EmbeddingVector::new(image.values().iter().map(|v| 3.5 * v).collect()).unwrap();
        let got = cosine_similarity(&text, &scaled).unwrap();
        assert!((got - base).abs() < 1e-12);
    }

    #[test]
    fn report_counts_match_composition_and_margins() {
        let (params, vocab, bench) = setup();
        let report = evaluate_choice(&params, &vocab, &bench).unwrap();
        assert_eq!(report.total, bench.len());
        let count_sum: usize = report.per_category.iter().map(|c| c.count).sum();
        assert_eq!(count_sum, bench.len());
        // Accuracy recomputed from margins equals the reported accuracy.
        let from_margins =
            report.margins.iter().filter(|(_, m)| *m > 0.0).count() as f64 / report.total as f64;
        assert_eq!(report.overall_accuracy, from_margins);
        for cat in &report.per_category {
            assert!(cat.accuracy >= 0.0 && cat.accuracy <= 1.0);
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let (params, vocab, bench) = setup();
        let a = evaluate_choice(&params, &vocab, &bench).unwrap();
        let b = evaluate_choice(&params, &vocab, &bench).unwrap();
        assert_eq!(a.overall_accuracy, b.overall_accuracy);
        assert_eq!(a.margins, b.margins);
    }

    #[test]
    fn distance_report_is_symmetric_and_consistent() {
        let (params, vocab, bench) = setup();
        let rows = distance_report(&params, &vocab, &bench[..5]).unwrap();
        assert_eq!(rows.len(), 5);
        for row in &rows {
            for d in [
                row.image_text,
                row.image_text_neg,
                row.image_image_neg,
                row.text_text_neg,
                row.text_image_neg,
                row.text_neg_image_neg,
            ] {
                assert!((0.0..=2.0).contains(&d), "cosine distance in [0, 2]");
            }
        }
    }

    #[test]
    fn oracle_encoder_reaches_perfect_accuracy() {
        // Hand-built parameters that decode the feature layout exactly;
        // perfect accuracy on a noiseless benchmark shows the task is
        // solvable in principle.
        let config = SynthConfig {
            bench_items: 120,
            noise_sigma: 0.0,
            ..SynthConfig::default()
        };
        let sizes = config.sizes;
        let mut rng = substream(29, "data");
        let items = synth::build_benchmark(&config, &Category::ALL, &mut rng).unwrap();
        let lexicon = synth::build_lexicon(sizes).unwrap();
        let vocab = Vocab::from_lexicon(&lexicon);
        let f = sizes.feature_dim();
        let encoder_config = EncoderConfig {
            vocab_size: vocab.len(),
            hidden_dim: f,
            embed_dim: f,
            feature_dim: f,
            max_len: 8,
            variant: TextEncoderVariant::PositionGated,
        };
        let mut params = EncoderParams::init(encoder_config, &mut substream(29, "init")).unwrap();

        // Feature blocks: [obj1 | att1 | rel | obj2 | att2].
        let obj1 = 0;
        let att1 = sizes.objects;
        let rel = att1 + sizes.attributes;
        let obj2 = rel + sizes.relations;
        let att2 = obj2 + sizes.objects;
        for row in &mut params.token_table {
            row.fill(0.0);
        }
        for (i, word) in synth::OBJECT_WORDS[..sizes.objects].iter().enumerate() {
            let id = vocab.id_of(word).unwrap();
            params.token_table[id][obj1 + i] = 1.0;
            params.token_table[id][obj2 + i] = 1.0;
        }
        for (i, word) in synth::ATTRIBUTE_WORDS[..sizes.attributes].iter().enumerate() {
            let id = vocab.id_of(word).unwrap();
            params.token_table[id][att1 + i] = 1.0;
            params.token_table[id][att2 + i] = 1.0;
        }
        for (i, (word, _)) in synth::RELATION_WORDS[..sizes.relations].iter().enumerate() {
            let id = vocab.id_of(word).unwrap();
            params.token_table[id][rel + i] = 1.0;
        }
        // Position gates select each template slot's role block, so a word
        // only counts in the role its position asserts.
        for row in &mut params.pos_table {
            row.fill(0.0);
        }
        let mut mask = |pos: usize, lo: usize, len: usize| {
            for j in lo..lo + len {
                params.pos_table[pos][j] = 1.0;
            }
        };
        mask(1, att1, sizes.attributes);
        mask(2, obj1, sizes.objects);
        mask(3, rel, sizes.relations);
        mask(5, att2, sizes.attributes);
        mask(6, obj2, sizes.objects);
        for (j, row) in params.text_proj.iter_mut().enumerate() {
            row.fill(0.0);
            row[j] = 1.0;
        }
        for (j, row) in params.image_proj.iter_mut().enumerate() {
            row.fill(0.0);
            row[j] = 1.0;
        }
        params.text_bias.fill(0.0);
        params.image_bias.fill(0.0);

        let bench: Vec<BenchmarkItem> = items.iter().map(BenchmarkItem::from).collect();
        let report = evaluate_choice(&params, &vocab, &bench).unwrap();
        assert_eq!(report.overall_accuracy, 1.0, "{:#?}", report.per_category);
    }

    #[test]
    fn identical_captions_give_zero_image_shift() {
        let (params, vocab, bench) = setup();
        let mut item = bench[0].clone();
        item.negative = item.positive.clone();
        let rows = distance_report(&params, &vocab, &[item]).unwrap();
        assert!(rows[0].image_image_neg.abs() < 1e-12);
        assert!(rows[0].text_text_neg.abs() < 1e-12);
    }
}
