//! `ahnpl` — reproducible runs of the whole pipeline: synthetic data
//! generation, textual hard negatives, training with ablation flags,
//! benchmark evaluation, gradient checks, and embedding-distance reports.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure.

mod manifest;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ahnpl_core::encoders::Vocab;
use ahnpl_core::eval;
use ahnpl_core::formats;
use ahnpl_core::gradcheck::{check_all_losses, standard_check_case, GradCheckSettings};
use ahnpl_core::pipeline::PipelineConfig;
use ahnpl_core::rng::{substream, substream_for};
use ahnpl_core::synth::{self, Category, SynthConfig, SynthSizes};
use ahnpl_core::textgen::{generate_negative_set, pos_tag, NegativeKind, TextualNegativeSet};
use ahnpl_core::trainer::{self, TrainConfig};
use ahnpl_core::Error;

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "ahnpl",
    version,
    about = "Contrastive learning with hard-negative perturbation, desk scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus, benchmark, feature files, and lexicon.
    GenData(GenDataArgs),
    /// Generate textual hard negatives for a corpus.
    GenNegatives(GenNegativesArgs),
    /// Train encoders; writes checkpoint, metrics CSV, and a JSON report.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a benchmark (binary caption choice).
    Eval(EvalArgs),
    /// Verify analytic gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Report pairwise cosine distances among the four key embeddings.
    DistanceReport(DistanceReportArgs),
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 2000)]
    train_pairs: usize,
    #[arg(long, default_value_t = 600)]
    bench_items: usize,
    #[arg(long, default_value_t = 8)]
    objects: usize,
    #[arg(long, default_value_t = 6)]
    attributes: usize,
    #[arg(long, default_value_t = 4)]
    relations: usize,
    #[arg(long, default_value_t = 0.4)]
    noise_sigma: f64,
}

#[derive(Args)]
struct GenNegativesArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    lexicon: PathBuf,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Named preset: `desk` or `paper-mscoco`.
    #[arg(long, default_value = "desk", conflicts_with = "config")]
    preset: String,
    /// JSON config file; overrides the preset entirely.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    negatives: PathBuf,
    #[arg(long)]
    benchmark: PathBuf,
    #[arg(long)]
    bench_features: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Drop hard negatives from the contrastive denominators.
    #[arg(long)]
    no_negatives: bool,
    /// Drop the multimodal hard-negative loss.
    #[arg(long)]
    no_mhnl: bool,
    /// Drop the dynamic margin loss.
    #[arg(long)]
    no_dmcl: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    benchmark: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also dump per-item margins as TSV.
    #[arg(long)]
    per_item: Option<PathBuf>,
}

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value_t = 1e-5)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.07)]
    tau: f64,
    /// Check at most this many coordinates per loss (seeded subset).
    #[arg(long)]
    max_coords: Option<usize>,
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
    /// Corrupt one analytic gradient coordinate by +1e-3 (sensitivity
    /// canary; the check is then expected to fail).
    #[arg(long)]
    corrupt: bool,
    /// Optional report file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DistanceReportArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    benchmark: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

enum CliError {
    Core(Error),
    GradcheckFailed,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            CliError::Core(_) => 1,
            CliError::GradcheckFailed => 2,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) => e.to_string(),
            CliError::GradcheckFailed => "gradient check failed".to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are successes, anything else is a
            // validation error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::GenData(args) => cmd_gen_data(args),
        Command::GenNegatives(args) => cmd_gen_negatives(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::DistanceReport(args) => cmd_distance_report(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn cmd_gen_data(args: GenDataArgs) -> Result<(), CliError> {
    let config = SynthConfig {
        sizes: SynthSizes {
            objects: args.objects,
            attributes: args.attributes,
            relations: args.relations,
        },
        train_pairs: args.train_pairs,
        bench_items: args.bench_items,
        noise_sigma: args.noise_sigma,
    };
    config.validate()?;
    fs::create_dir_all(&args.out_dir).map_err(Error::from)?;

    let lexicon = synth::build_lexicon(config.sizes)?;
    let mut data_rng = substream(args.seed, "data");
    let pairs = synth::build_train_corpus(&config, &mut data_rng)?;
    let bench = synth::build_benchmark(&config, &Category::ALL, &mut data_rng)?;

    let lexicon_path = args.out_dir.join("lexicon.tsv");
    let corpus_path = args.out_dir.join("train.tsv");
    let features_path = args.out_dir.join("train-features.tsv");
    let bench_path = args.out_dir.join("bench.tsv");
    let bench_features_path = args.out_dir.join("bench-features.tsv");

    formats::write_lexicon(&lexicon_path, &lexicon)?;
    let captions: Vec<_> = pairs.iter().map(|p| p.caption.clone()).collect();
    formats::write_corpus(&corpus_path, &captions)?;
    let dim = config.sizes.feature_dim();
    let train_features: Vec<(String, Vec<f64>)> = pairs
        .iter()
        .map(|p| (p.id.clone(), p.features.clone()))
        .collect();
    formats::write_embeddings(&features_path, dim, &train_features)?;
    formats::write_benchmark(&bench_path, &bench)?;
    let bench_features: Vec<(String, Vec<f64>)> = bench
        .iter()
        .map(|i| (i.id.clone(), i.features.clone()))
        .collect();
    formats::write_embeddings(&bench_features_path, dim, &bench_features)?;

    let config_json = serde_json::to_vec_pretty(&config).map_err(Error::from)?;
    let mut manifest =
        RunManifest::new("gen-data", Some(args.seed)).with_config_bytes(&config_json);
    for path in [
        &lexicon_path,
        &corpus_path,
        &features_path,
        &bench_path,
        &bench_features_path,
    ] {
        manifest.add_output(path);
    }
    manifest.write(&args.out_dir.join("manifest.json"))?;

    println!(
        "wrote {} train pairs, {} benchmark items (feature dim {}) to {}",
        pairs.len(),
        bench.len(),
        dim,
        args.out_dir.display()
    );
    Ok(())
}

fn cmd_gen_negatives(args: GenNegativesArgs) -> Result<(), CliError> {
    let lexicon = formats::read_lexicon(&args.lexicon)?;
    let corpus = formats::read_corpus(&args.corpus)?;
    if args.k == 0 {
        return Err(Error::Config("--k must be ≥ 1".into()).into());
    }

    let mut sets: Vec<TextualNegativeSet> = Vec::with_capacity(corpus.len());
    let mut kind_counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut skipped = 0usize;
    for (id, tokens) in &corpus {
        let caption = pos_tag(id, tokens, &lexicon)?;
        let mut rng = substream_for(args.seed, "negatives", id);
        let set = generate_negative_set(&caption, args.k, &lexicon, &mut rng)?;
        if set.is_empty() {
            skipped += 1;
            continue;
        }
        for neg in &set.negatives {
            *kind_counts.entry(neg.kind.as_str()).or_insert(0) += 1;
        }
        sets.push(set);
    }
    formats::write_negatives(&args.out, &sets)?;

    let mut manifest = RunManifest::new("gen-negatives", Some(args.seed));
    manifest.add_input(&args.corpus)?;
    manifest.add_input(&args.lexicon)?;
    manifest.add_output(&args.out);
    manifest.write(&with_suffix(&args.out, ".manifest.json"))?;

    let swaps = kind_counts.get(NegativeKind::NounSwap.as_str()).copied().unwrap_or(0);
    let subs = kind_counts
        .get(NegativeKind::Substitution.as_str())
        .copied()
        .unwrap_or(0);
    println!(
        "{} captions: {} noun swaps, {} substitutions, {} skipped (no applicable rule)",
        corpus.len(),
        swaps,
        subs,
        skipped
    );
    Ok(())
}

fn resolve_train_config(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut config = match &args.config {
        Some(path) => {
            let bytes = fs::read(path).map_err(Error::from)?;
            serde_json::from_slice::<TrainConfig>(&bytes).map_err(Error::from)?
        }
        None => TrainConfig::preset(&args.preset)?,
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if args.no_negatives {
        config.flags.use_negatives = false;
    }
    if args.no_mhnl {
        config.flags.use_mhnl = false;
    }
    if args.no_dmcl {
        config.flags.use_dmcl = false;
    }
    config.validate()?;
    Ok(config)
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let config = resolve_train_config(&args)?;
    fs::create_dir_all(&args.out_dir).map_err(Error::from)?;

    let lexicon_path = args.corpus.parent().map(|d| d.join("lexicon.tsv"));
    let vocab = match &lexicon_path {
        Some(path) if path.exists() => Vocab::from_lexicon(&formats::read_lexicon(path)?),
        _ => {
            return Err(Error::Config(
                "expected lexicon.tsv next to the corpus file".into(),
            )
            .into())
        }
    };

    let captions = formats::read_corpus(&args.corpus)?;
    let (_, features) = formats::read_embeddings(&args.features)?;
    let negative_records = formats::read_negatives(&args.negatives)?;
    let negatives = formats::negatives_by_source(&negative_records);
    let samples = trainer::samples_from_parts(&captions, &features, &negatives, &vocab)?;
    let benchmark = formats::load_benchmark(&args.benchmark, &args.bench_features)?;

    let outcome = trainer::train(&config, &samples, &benchmark, &vocab)?;

    let config_path = args.out_dir.join("config.json");
    let checkpoint_path = args.out_dir.join("checkpoint.txt");
    let metrics_path = args.out_dir.join("metrics.csv");
    let report_path = args.out_dir.join("report.json");
    let config_json = serde_json::to_vec_pretty(&config).map_err(Error::from)?;
    fs::write(&config_path, &config_json).map_err(Error::from)?;
    formats::write_checkpoint(&checkpoint_path, &outcome.params, outcome.margin.a, &vocab)?;
    formats::write_metrics_csv(&metrics_path, &outcome.report.steps, config.negative_slots)?;
    fs::write(
        &report_path,
        serde_json::to_string_pretty(&outcome.report).map_err(Error::from)?,
    )
    .map_err(Error::from)?;

    let mut manifest =
        RunManifest::new("train", Some(config.seed)).with_config_bytes(&config_json);
    for input in [
        &args.corpus,
        &args.features,
        &args.negatives,
        &args.benchmark,
        &args.bench_features,
    ] {
        manifest.add_input(input)?;
    }
    for output in [&config_path, &checkpoint_path, &metrics_path, &report_path] {
        manifest.add_output(output);
    }
    manifest.write(&args.out_dir.join("manifest.json"))?;

    let last_eval = outcome.report.epoch_evals.last();
    println!(
        "trained {} steps ({} samples kept, {} dropped); final accuracy {}; checkpoint {}",
        outcome.report.steps.len(),
        samples.len() - outcome.report.dropped_samples,
        outcome.report.dropped_samples,
        last_eval.map_or("n/a".to_string(), |e| format!("{:.4}", e.overall_accuracy)),
        outcome.report.checkpoint_id
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let (params, _, vocab) = formats::read_checkpoint(&args.checkpoint)?;
    let items = formats::load_benchmark(&args.benchmark, &args.features)?;
    let report = eval::evaluate_choice(&params, &vocab, &items)?;
    formats::write_eval_csv(&args.out, &report)?;
    if let Some(path) = &args.per_item {
        formats::write_items_tsv(path, &report)?;
    }

    let mut manifest = RunManifest::new("eval", None);
    for input in [&args.checkpoint, &args.benchmark, &args.features] {
        manifest.add_input(input)?;
    }
    manifest.add_output(&args.out);
    if let Some(path) = &args.per_item {
        manifest.add_output(path);
    }
    manifest.write(&with_suffix(&args.out, ".manifest.json"))?;

    for cat in &report.per_category {
        println!("{:<12} {:>4} items  accuracy {:.4}", cat.category, cat.count, cat.accuracy);
    }
    println!(
        "OVERALL      {:>4} items  accuracy {:.4}",
        report.total, report.overall_accuracy
    );
    Ok(())
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let (params, inputs, state) = standard_check_case(args.seed);
    let pipeline_config = PipelineConfig {
        tau: args.tau,
        ..PipelineConfig::default()
    };
    let settings = GradCheckSettings {
        epsilon: args.epsilon,
        max_coords: args.max_coords,
        seed: args.seed,
        corrupt: args.corrupt.then_some((3, 1e-3)),
    };
    let reports = check_all_losses(
        &params,
        &inputs,
        &state,
        &pipeline_config,
        &settings,
        args.tolerance,
    )?;

    let mut lines = String::new();
    for report in &reports {
        println!("{}", report.summary_line());
        lines.push_str(&report.summary_line());
        lines.push('\n');
    }
    if let Some(out) = &args.out {
        fs::write(out, &lines).map_err(Error::from)?;
        let mut manifest = RunManifest::new("gradcheck", Some(args.seed));
        manifest.add_output(out);
        manifest.write(&with_suffix(out, ".manifest.json"))?;
    }
    if reports.iter().any(|r| !r.passed) {
        return Err(CliError::GradcheckFailed);
    }
    Ok(())
}

fn cmd_distance_report(args: DistanceReportArgs) -> Result<(), CliError> {
    let (params, _, vocab) = formats::read_checkpoint(&args.checkpoint)?;
    let items = formats::load_benchmark(&args.benchmark, &args.features)?;
    let rows = eval::distance_report(&params, &vocab, &items)?;
    formats::write_distances_csv(&args.out, &rows)?;

    let mut manifest = RunManifest::new("distance-report", None);
    for input in [&args.checkpoint, &args.benchmark, &args.features] {
        manifest.add_input(input)?;
    }
    manifest.add_output(&args.out);
    manifest.write(&with_suffix(&args.out, ".manifest.json"))?;

    let n = rows.len() as f64;
    let mean = |f: fn(&ahnpl_core::eval::DistanceRow) -> f64| -> f64 {
        rows.iter().map(f).sum::<f64>() / n
    };
    println!("{} examples", rows.len());
    println!("mean d(image, text)          {:.4}", mean(|r| r.image_text));
    println!("mean d(image, text_neg)      {:.4}", mean(|r| r.image_text_neg));
    println!("mean d(image, image_neg)     {:.4}", mean(|r| r.image_image_neg));
    println!("mean d(text, text_neg)       {:.4}", mean(|r| r.text_text_neg));
    println!("mean d(text, image_neg)      {:.4}", mean(|r| r.text_image_neg));
    println!("mean d(text_neg, image_neg)  {:.4}", mean(|r| r.text_neg_image_neg));
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map_or_else(String::new, |n| {
        n.to_string_lossy().into_owned()
    });
    name.push_str(suffix);
    path.with_file_name(name)
}
