//! On-disk formats: embedding files, corpora, lexica, negative corpora,
//! benchmark files, checkpoints, and the CSV reports.
//!
//! Everything is line-oriented UTF-8. Floats are written with Rust's
//! shortest round-trip formatting, so write → read is lossless and
//! identical inputs produce byte-identical files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::encoders::{EncoderConfig, EncoderParams, Vocab};
use crate::error::{Error, Result};
use crate::eval::{BenchmarkItem, DistanceRow, EvalReport};
use crate::synth::ChoiceItem;
use crate::textgen::{Caption, NegativeKind, PosLexicon, PosTag, TextualNegativeSet};
use crate::trainer::StepRecord;

/// `(id, values)` record of an embedding or feature file.
pub type EmbeddingRecord = (String, Vec<f64>);
/// `(item_id, category, positive tokens, negative tokens)` benchmark row.
pub type BenchmarkRow = (String, String, Vec<String>, Vec<String>);

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_f64(path: &Path, line: usize, s: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| parse_err(path, line, format!("bad float {s:?}")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("non-finite float {s:?}")));
    }
    Ok(v)
}

fn float_row(values: &[f64]) -> String {
    let mut out = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&format!("{v}"));
    }
    out
}

// ---------------------------------------------------------------------------
// Embedding file: `#dim D` header, then `id<TAB>v1 v2 ... vD` per line.
// ---------------------------------------------------------------------------

pub fn write_embeddings(path: &Path, dim: usize, records: &[EmbeddingRecord]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "#dim {dim}")?;
    for (id, values) in records {
        debug_assert_eq!(values.len(), dim);
        writeln!(w, "{id}\t{}", float_row(values))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_embeddings(path: &Path) -> Result<(usize, Vec<EmbeddingRecord>)> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty embedding file"))?;
    let dim: usize = header
        .strip_prefix("#dim ")
        .and_then(|d| d.parse().ok())
        .ok_or_else(|| parse_err(path, 1, "expected `#dim D` header"))?;
    let mut records = Vec::new();
    for (idx, line) in lines {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, lineno, "expected `id<TAB>values`"))?;
        let values: Vec<f64> = rest
            .split(' ')
            .map(|s| parse_f64(path, lineno, s))
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(parse_err(
                path,
                lineno,
                format!("expected {dim} values, got {}", values.len()),
            ));
        }
        records.push((id.to_string(), values));
    }
    Ok((dim, records))
}

// ---------------------------------------------------------------------------
// Corpus file: `id<TAB>token token ...`.
// ---------------------------------------------------------------------------

pub fn write_corpus(path: &Path, captions: &[Caption]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for caption in captions {
        writeln!(w, "{}\t{}", caption.id, caption.tokens.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_corpus(path: &Path) -> Result<Vec<(String, Vec<String>)>> {
    let content = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let (id, rest) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, lineno, "expected `id<TAB>tokens`"))?;
        let tokens: Vec<String> = rest.split(' ').map(str::to_string).collect();
        if tokens.iter().any(String::is_empty) {
            return Err(parse_err(path, lineno, "empty token"));
        }
        out.push((id.to_string(), tokens));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Lexicon file: `word<TAB>TAG`.
// ---------------------------------------------------------------------------

pub fn write_lexicon(path: &Path, lexicon: &PosLexicon) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (word, tag) in lexicon.words() {
        writeln!(w, "{word}\t{}", tag.as_str())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_lexicon(path: &Path) -> Result<PosLexicon> {
    let content = fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let (word, tag) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, lineno, "expected `word<TAB>TAG`"))?;
        entries.push((word.to_string(), PosTag::parse(tag)?));
    }
    PosLexicon::from_entries(entries)
}

// ---------------------------------------------------------------------------
// Negative corpus: `source_id<TAB>slot<TAB>kind<TAB>tokens...`.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct NegativeRecord {
    pub source_id: String,
    pub slot: usize,
    pub kind: NegativeKind,
    pub tokens: Vec<String>,
}

pub fn write_negatives(path: &Path, sets: &[TextualNegativeSet]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for set in sets {
        for neg in &set.negatives {
            writeln!(
                w,
                "{}\t{}\t{}\t{}",
                set.source_id,
                neg.slot,
                neg.kind.as_str(),
                neg.caption.tokens.join(" ")
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_negatives(path: &Path) -> Result<Vec<NegativeRecord>> {
    let content = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let mut fields = line.splitn(4, '\t');
        let source_id = fields
            .next()
            .ok_or_else(|| parse_err(path, lineno, "missing source id"))?;
        let slot: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(path, lineno, "bad slot index"))?;
        let kind = NegativeKind::parse(
            fields
                .next()
                .ok_or_else(|| parse_err(path, lineno, "missing kind"))?,
        )?;
        let tokens: Vec<String> = fields
            .next()
            .ok_or_else(|| parse_err(path, lineno, "missing tokens"))?
            .split(' ')
            .map(str::to_string)
            .collect();
        out.push(NegativeRecord {
            source_id: source_id.to_string(),
            slot,
            kind,
            tokens,
        });
    }
    Ok(out)
}

/// Groups negative records by source id, ordered by slot.
pub fn negatives_by_source(
    records: &[NegativeRecord],
) -> std::collections::BTreeMap<String, Vec<Vec<String>>> {
    let mut by_source: std::collections::BTreeMap<String, Vec<(usize, Vec<String>)>> =
        std::collections::BTreeMap::new();
    for record in records {
        by_source
            .entry(record.source_id.clone())
            .or_default()
            .push((record.slot, record.tokens.clone()));
    }
    by_source
        .into_iter()
        .map(|(id, mut slots)| {
            slots.sort_by_key(|(slot, _)| *slot);
            (id, slots.into_iter().map(|(_, tokens)| tokens).collect())
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Benchmark file: `item_id<TAB>category<TAB>positive tokens<TAB>negative
// tokens`, with a sibling feature file in the embedding format.
// ---------------------------------------------------------------------------

pub fn write_benchmark(path: &Path, items: &[ChoiceItem]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for item in items {
        writeln!(
            w,
            "{}\t{}\t{}\t{}",
            item.id,
            item.category.as_str(),
            item.positive.tokens.join(" "),
            item.negative.tokens.join(" ")
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Benchmark rows without features (id, category, positive, negative).
pub fn read_benchmark_rows(path: &Path) -> Result<Vec<BenchmarkRow>> {
    let content = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in content.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let fields: Vec<&str> = line.splitn(4, '\t').collect();
        if fields.len() != 4 {
            return Err(parse_err(path, lineno, "expected 4 tab-separated fields"));
        }
        let split = |s: &str| -> Vec<String> { s.split(' ').map(str::to_string).collect() };
        out.push((
            fields[0].to_string(),
            fields[1].to_string(),
            split(fields[2]),
            split(fields[3]),
        ));
    }
    Ok(out)
}

/// Joins benchmark rows with their feature file by item id.
pub fn load_benchmark(bench_path: &Path, features_path: &Path) -> Result<Vec<BenchmarkItem>> {
    let rows = read_benchmark_rows(bench_path)?;
    let (_, features) = read_embeddings(features_path)?;
    let by_id: std::collections::BTreeMap<&str, &Vec<f64>> = features
        .iter()
        .map(|(id, values)| (id.as_str(), values))
        .collect();
    rows.into_iter()
        .map(|(id, category, positive, negative)| {
            let features = by_id
                .get(id.as_str())
                .ok_or_else(|| Error::Config(format!("no features for benchmark item {id}")))?;
            Ok(BenchmarkItem {
                id,
                category,
                positive,
                negative,
                features: (*features).clone(),
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Checkpoint: `#ahnpl-ckpt v1` header, config, `a`, vocabulary, then named
// parameter blocks in the embedding text format.
// ---------------------------------------------------------------------------

const CKPT_HEADER: &str = "#ahnpl-ckpt v1";

pub fn write_checkpoint(path: &Path, params: &EncoderParams, a: f64, vocab: &Vocab) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    writeln!(w, "{CKPT_HEADER}")?;
    writeln!(w, "#config {}", serde_json::to_string(&params.config)?)?;
    writeln!(w, "#a {a}")?;
    writeln!(w, "#vocab {}", vocab.words().join(" "))?;
    let block = |w: &mut BufWriter<fs::File>, name: &str, rows: &[Vec<f64>], dim: usize| {
        writeln!(w, "#param {name}")?;
        writeln!(w, "#dim {dim}")?;
        for (i, row) in rows.iter().enumerate() {
            writeln!(w, "{i}\t{}", float_row(row))?;
        }
        std::io::Result::Ok(())
    };
    let cfg = params.config;
    block(&mut w, "token_table", &params.token_table, cfg.hidden_dim)?;
    block(&mut w, "pos_table", &params.pos_table, cfg.hidden_dim)?;
    block(&mut w, "text_proj", &params.text_proj, cfg.embed_dim)?;
    block(
        &mut w,
        "text_bias",
        std::slice::from_ref(&params.text_bias),
        cfg.embed_dim,
    )?;
    block(&mut w, "image_proj", &params.image_proj, cfg.embed_dim)?;
    block(
        &mut w,
        "image_bias",
        std::slice::from_ref(&params.image_bias),
        cfg.embed_dim,
    )?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<(EncoderParams, f64, Vocab)> {
    let content = fs::read_to_string(path)?;
    let mut lines = content.lines().enumerate().peekable();

    let expect_prefix = |pair: Option<(usize, &str)>, prefix: &str| -> Result<String> {
        let (idx, line) = pair.ok_or_else(|| parse_err(path, 0, "truncated checkpoint"))?;
        line.strip_prefix(prefix)
            .map(str::to_string)
            .ok_or_else(|| parse_err(path, idx + 1, format!("expected `{prefix}...`")))
    };

    let (_, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty checkpoint"))?;
    if header != CKPT_HEADER {
        return Err(parse_err(path, 1, format!("bad header {header:?}")));
    }
    let config: EncoderConfig = serde_json::from_str(&expect_prefix(lines.next(), "#config ")?)?;
    let a = {
        let raw = expect_prefix(lines.next(), "#a ")?;
        parse_f64(path, 3, &raw)?
    };
    let words: Vec<String> = expect_prefix(lines.next(), "#vocab ")?
        .split(' ')
        .map(str::to_string)
        .collect();
    let mut vocab = Vocab::from_words(words)?;
    vocab.reindex();

    let mut read_block = |name: &str, rows: usize, dim: usize| -> Result<Vec<Vec<f64>>> {
        let got = expect_prefix(lines.next(), "#param ")?;
        if got != name {
            return Err(parse_err(path, 0, format!("expected block {name}, got {got}")));
        }
        let got_dim: usize = expect_prefix(lines.next(), "#dim ")?
            .parse()
            .map_err(|_| parse_err(path, 0, "bad #dim"))?;
        if got_dim != dim {
            return Err(parse_err(
                path,
                0,
                format!("block {name}: dim {got_dim}, expected {dim}"),
            ));
        }
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let (idx, line) = lines
                .next()
                .ok_or_else(|| parse_err(path, 0, format!("block {name} truncated at row {r}")))?;
            let lineno = idx + 1;
            let (_, rest) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(path, lineno, "expected `row<TAB>values`"))?;
            let values: Vec<f64> = rest
                .split(' ')
                .map(|s| parse_f64(path, lineno, s))
                .collect::<Result<_>>()?;
            if values.len() != dim {
                return Err(parse_err(path, lineno, "row width mismatch"));
            }
            out.push(values);
        }
        Ok(out)
    };

    let pos_rows = match config.variant {
        crate::encoders::TextEncoderVariant::BagOfTokens => 0,
        crate::encoders::TextEncoderVariant::PositionGated => config.max_len,
    };
    let token_table = read_block("token_table", config.vocab_size, config.hidden_dim)?;
    let pos_table = read_block("pos_table", pos_rows, config.hidden_dim)?;
    let text_proj = read_block("text_proj", config.hidden_dim, config.embed_dim)?;
    let text_bias = read_block("text_bias", 1, config.embed_dim)?.remove(0);
    let image_proj = read_block("image_proj", config.feature_dim, config.embed_dim)?;
    let image_bias = read_block("image_bias", 1, config.embed_dim)?.remove(0);

    if vocab.len() != config.vocab_size {
        return Err(Error::Config(format!(
            "checkpoint vocab has {} words, config says {}",
            vocab.len(),
            config.vocab_size
        )));
    }
    Ok((
        EncoderParams {
            config,
            token_table,
            pos_table,
            text_proj,
            text_bias,
            image_proj,
            image_bias,
        },
        a,
        vocab,
    ))
}

// ---------------------------------------------------------------------------
// Metrics CSV: step, loss terms, a, then M_0..M_{K-1}.
// ---------------------------------------------------------------------------

pub fn metrics_csv_string(steps: &[StepRecord], slots: usize) -> String {
    let mut out = String::from("step,l_cont,l_neg_visual,l_neg_textual,l_mar_pos,l_mar_neg,l_total,a");
    for n in 0..slots {
        out.push_str(&format!(",M_{n}"));
    }
    out.push('\n');
    for s in steps {
        let v = &s.values;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            s.step, v.l_cont, v.l_neg_visual, v.l_neg_textual, v.l_mar_pos, v.l_mar_neg, v.l_total, s.a
        ));
        for n in 0..slots {
            out.push_str(&format!(",{}", s.thresholds.get(n).copied().unwrap_or(0.0)));
        }
        out.push('\n');
    }
    out
}

pub fn write_metrics_csv(path: &Path, steps: &[StepRecord], slots: usize) -> Result<()> {
    fs::write(path, metrics_csv_string(steps, slots))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Evaluation reports.
// ---------------------------------------------------------------------------

pub fn write_eval_csv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut out = String::from("category,count,accuracy\n");
    for cat in &report.per_category {
        out.push_str(&format!("{},{},{}\n", cat.category, cat.count, cat.accuracy));
    }
    out.push_str(&format!(
        "OVERALL,{},{}\n",
        report.total, report.overall_accuracy
    ));
    fs::write(path, out)?;
    Ok(())
}

/// Per-item margin dump (id, margin, correct) behind the CLI flag.
pub fn write_items_tsv(path: &Path, report: &EvalReport) -> Result<()> {
    let mut out = String::new();
    for (id, margin) in &report.margins {
        out.push_str(&format!("{id}\t{margin}\t{}\n", *margin > 0.0));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_distances_csv(path: &Path, rows: &[DistanceRow]) -> Result<()> {
    let mut out = String::from(
        "item_id,d_image_text,d_image_textneg,d_image_imageneg,d_text_textneg,d_text_imageneg,d_textneg_imageneg\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.id,
            r.image_text,
            r.image_text_neg,
            r.image_image_neg,
            r.text_text_neg,
            r.text_image_neg,
            r.text_neg_image_neg
        ));
    }
    fs::write(path, out)?;
    Ok(())
}
