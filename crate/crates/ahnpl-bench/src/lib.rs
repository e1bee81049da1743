//! Shared fixtures for the criterion benchmarks.

use std::collections::BTreeMap;

use ahnpl_core::encoders::Vocab;
use ahnpl_core::eval::BenchmarkItem;
use ahnpl_core::rng::{substream, substream_for};
use ahnpl_core::synth::{self, Category, SynthConfig};
use ahnpl_core::textgen::generate_negative_set;
use ahnpl_core::trainer::{self, TrainSample};

/// Builds the default synthetic dataset joined into train samples.
pub fn dataset(seed: u64, train_pairs: usize, bench_items: usize) -> (Vec<TrainSample>, Vec<BenchmarkItem>, Vocab) {
    let synth_cfg = SynthConfig {
        train_pairs,
        bench_items,
        ..SynthConfig::default()
    };
    let lexicon = synth::build_lexicon(synth_cfg.sizes).unwrap();
    let vocab = Vocab::from_lexicon(&lexicon);
    let mut data_rng = substream(seed, "data");
    let pairs = synth::build_train_corpus(&synth_cfg, &mut data_rng).unwrap();
    let bench = synth::build_benchmark(&synth_cfg, &Category::ALL, &mut data_rng).unwrap();
    let benchmark: Vec<BenchmarkItem> = bench.iter().map(BenchmarkItem::from).collect();

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
        let set = generate_negative_set(&pair.caption, 2, &lexicon, &mut rng).unwrap();
        if !set.is_empty() {
            negatives.insert(
                pair.id.clone(),
                set.negatives.iter().map(|n| n.caption.tokens.clone()).collect(),
            );
        }
    }
    let samples = trainer::samples_from_parts(&captions, &features, &negatives, &vocab).unwrap();
    (samples, benchmark, vocab)
}
