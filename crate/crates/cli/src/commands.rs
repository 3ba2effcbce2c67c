use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use highlight_core::corpus::{
    generate_synthetic_corpus, parse_corpus, tokenize, write_corpus, LabeledExample, PunctMode, Transcript,
};
use highlight_core::dataset::{build_dataset, split_transcripts, transcript_examples, Dataset};
use highlight_core::evaluation::{evaluate_transcript, macro_average, stratify, temporal_drift, TranscriptReport};
use highlight_core::features::{load_embedding_table, EmbeddingTable};
use highlight_core::interval::{h_coverage, reduce_superclips};
use highlight_core::models::{
    load_model, save_model, train_ensemble, EnsembleModel, Family, FeatureKind, HighlightScorer,
};
use highlight_core::sampling::{extract, SelectionResult};
use serde::Serialize;
use serde_json::json;

use crate::config::PipelineConfig;

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    create_parent(path)?;
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = create(path)?;
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut out = create(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn read_jsonl<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut rows = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(serde_json::from_str(&line).with_context(|| format!("{}:{}", path.display(), i + 1))?);
    }
    Ok(rows)
}

fn load_corpus(config: &PipelineConfig) -> Result<Vec<Transcript>> {
    let path = config.paths.resolve(&config.paths.corpus);
    let parsed = parse_corpus(open(&path)?)?;
    for issue in parsed.warnings.iter().chain(&parsed.skipped) {
        eprintln!("{}:{}: {}", path.display(), issue.line, issue.message);
    }
    if parsed.transcripts.is_empty() {
        return Err(highlight_core::Error::Empty("corpus has no usable transcripts").into());
    }
    Ok(parsed.transcripts)
}

fn load_table(path: &Path) -> Result<EmbeddingTable> {
    let mut reader = open(path)?;
    let head = reader.fill_buf()?;
    if head.starts_with(b"HLE1") {
        Ok(EmbeddingTable::read_binary(reader)?)
    } else {
        Ok(load_embedding_table(reader)?)
    }
}

fn load_trained(config: &PipelineConfig) -> Result<EnsembleModel> {
    let path = config.paths.resolve(&config.paths.model);
    let model = load_model(open(&path)?).with_context(|| format!("loading model {}", path.display()))?;
    model.preprocessing.ensure_matches(&config.train.preprocessing)?;
    Ok(model)
}

fn test_transcripts(config: &PipelineConfig) -> Result<Vec<Transcript>> {
    let (_, test) = split_transcripts(&load_corpus(config)?, config.seed, config.dataset.test_fraction);
    if test.is_empty() {
        bail!("no held-out transcripts; raise dataset.test_fraction");
    }
    Ok(test)
}

pub fn synth(config: &PipelineConfig) -> Result<()> {
    let corpus = generate_synthetic_corpus(config.seed, &config.synth)?;
    let path = config.paths.resolve(&config.paths.corpus);
    let mut out = create(&path)?;
    write_corpus(&mut out, &corpus)?;
    out.flush()?;
    println!("{}", json!({"command": "synth", "transcripts": corpus.len(), "corpus": path}));
    Ok(())
}

pub fn dataset_build(config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(config)?;
    let (train, test) = split_transcripts(&corpus, config.seed, config.dataset.test_fraction);
    let Dataset { examples, stats } = build_dataset(&train, &config.dataset, config.seed)?;
    let path = config.paths.resolve(&config.paths.dataset);
    write_jsonl(&path, &examples)?;
    let record = json!({
        "train_transcripts": train.len(),
        "test_transcripts": test.len(),
        "examples": examples.len(),
        "stats": stats,
    });
    write_json(&config.paths.report("dataset_stats.json"), &record)?;
    println!("{}", json!({"command": "dataset-build", "dataset": path, "summary": record}));
    Ok(())
}

const WORD_EDGES: [usize; 9] = [1, 2, 5, 10, 20, 50, 100, 200, 500];

fn word_histogram(counts: &[usize]) -> Vec<usize> {
    let mut h = vec![0; WORD_EDGES.len()];
    for &c in counts {
        let bin = WORD_EDGES.partition_point(|&e| e <= c);
        if bin > 0 {
            h[bin - 1] += 1;
        }
    }
    h
}

/// Word-count histograms of clips before and after superclip reduction and
/// of non-clips before and after redistribution, plus the h-coverage spread.
pub fn dataset_stats(config: &PipelineConfig) -> Result<()> {
    let corpus = load_corpus(config)?;
    let mut raw = Vec::new();
    let mut clean = Vec::new();
    let mut nonclips = Vec::new();
    let mut coverage = [0usize; 10];
    for t in &corpus {
        raw.extend(t.clips.iter().map(|c| tokenize(t.slice(*c), PunctMode::Strip).len()));
        let (c, n) = transcript_examples(t);
        clean.extend(c.iter().map(|e| e.word_count));
        nonclips.extend(n.iter().map(|e| e.word_count));
        let h = h_coverage(t.char_len(), &reduce_superclips(&t.clips))?;
        coverage[((h * 10.0) as usize).min(9)] += 1;
    }
    let dataset = build_dataset(&corpus, &config.dataset, config.seed)?;
    let redistributed: Vec<usize> = dataset.examples.iter().filter(|e| e.label() == 0).map(|e| e.word_count).collect();

    let columns = [
        ("clips_orig", word_histogram(&raw)),
        ("clips_clean", word_histogram(&clean)),
        ("nclips", word_histogram(&nonclips)),
        ("nclips_redist", word_histogram(&redistributed)),
    ];
    let mut text = String::from("word count histogram\n");
    write!(text, "{:<10}", "words")?;
    for (name, _) in &columns {
        write!(text, "{name:>14}")?;
    }
    text.push('\n');
    for (i, lo) in WORD_EDGES.iter().enumerate() {
        let label = match WORD_EDGES.get(i + 1) {
            Some(hi) => format!("{lo}-{}", hi - 1),
            None => format!("{lo}+"),
        };
        write!(text, "{label:<10}")?;
        for (_, h) in &columns {
            write!(text, "{:>14}", h[i])?;
        }
        text.push('\n');
    }
    text.push_str("\nh-coverage histogram\n");
    for (i, n) in coverage.iter().enumerate() {
        writeln!(text, "{:.1}-{:.1}  {n:>8}", i as f64 / 10.0, (i + 1) as f64 / 10.0)?;
    }
    writeln!(
        text,
        "\nks distance {:.4} -> {:.4}\nlength drift auc {:.4} -> {:.4}",
        dataset.stats.ks_before, dataset.stats.ks_after, dataset.stats.drift_auc_before, dataset.stats.drift_auc_after
    )?;
    write_text(&config.paths.report("dataset_stats.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn train(config: &PipelineConfig) -> Result<()> {
    let path = config.paths.resolve(&config.paths.dataset);
    let examples: Vec<LabeledExample> = read_jsonl(&path)?;
    if examples.is_empty() {
        return Err(highlight_core::Error::Empty("dataset has no examples").into());
    }
    let needs_table = match config.train.family {
        Family::Gbm => config.train.features.kind == FeatureKind::Embedding,
        Family::Lstm => config.pretrained_embeddings,
    };
    let table = if needs_table {
        let Some(p) = &config.paths.embeddings else {
            bail!("this configuration needs paths.embeddings");
        };
        Some(Arc::new(load_table(&config.paths.resolve(p))?))
    } else {
        None
    };
    let fit = train_ensemble(&examples, &config.train, table)?;
    let model_path = config.paths.resolve(&config.paths.model);
    let mut out = create(&model_path)?;
    save_model(&fit.model, &mut out)?;
    out.flush()?;
    let record = json!({
        "family": config.train.family,
        "preprocessing": config.train.preprocessing,
        "examples": examples.len(),
        "members": fit.model.members.len(),
        "threshold": fit.model.threshold,
        "oof_auc": fit.oof_auc,
        "best_steps": fit.best_steps,
        "dev_auc_traces": fit.dev_auc_traces,
    });
    write_json(&config.paths.report("train.json"), &record)?;
    println!(
        "{}",
        json!({"command": "train", "model": model_path, "oof_auc": fit.oof_auc, "threshold": fit.model.threshold})
    );
    Ok(())
}

pub fn score(config: &PipelineConfig, texts: &[String], input: Option<&Path>) -> Result<()> {
    let model = load_trained(config)?;
    let mut lines: Vec<String> = texts.to_vec();
    if let Some(p) = input {
        let mut s = String::new();
        if p.as_os_str() == "-" {
            std::io::stdin().read_to_string(&mut s)?;
        } else {
            open(p)?.read_to_string(&mut s)?;
        }
        lines.extend(s.lines().filter(|l| !l.trim().is_empty()).map(String::from));
    }
    if lines.is_empty() {
        return Err(highlight_core::Error::Empty("nothing to score; pass --text or --input").into());
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    for text in &lines {
        let h = model.h_score(&tokenize(text, PunctMode::Keep))?;
        let record = json!({"text": text, "h_score": h, "highlight": h >= model.threshold});
        writeln!(out, "{record}")?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SelectedRecord {
    start_sentence: usize,
    end_sentence: usize,
    h_score: f64,
}

#[derive(Serialize)]
struct ExtractRecord<'a> {
    transcript_id: &'a str,
    sampler: highlight_core::sampling::Sampler,
    n_i: usize,
    n_f: usize,
    selected: Vec<SelectedRecord>,
    sentence_scores: &'a [f64],
}

fn run_extraction(config: &PipelineConfig, model: &EnsembleModel, t: &Transcript) -> Result<SelectionResult> {
    let s = &config.sampling;
    Ok(extract(t, s.sampler, s.n_i, s.n_f, |tokens| model.h_score(tokens))?)
}

pub fn extract_cmd(config: &PipelineConfig) -> Result<()> {
    let model = load_trained(config)?;
    let transcripts = test_transcripts(config)?;
    let path = config.paths.report("extract.jsonl");
    let mut out = create(&path)?;
    for t in &transcripts {
        let sel = run_extraction(config, &model, t)?;
        let record = ExtractRecord {
            transcript_id: &t.id,
            sampler: sel.sampler,
            n_i: config.sampling.n_i,
            n_f: config.sampling.n_f,
            selected: sel
                .selected
                .iter()
                .map(|f| SelectedRecord {
                    start_sentence: f.fragment.start_sentence,
                    end_sentence: f.fragment.end_sentence,
                    h_score: f.h_score,
                })
                .collect(),
            sentence_scores: &sel.sentence_scores,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    println!("{}", json!({"command": "extract", "transcripts": transcripts.len(), "output": path}));
    Ok(())
}

pub fn eval(config: &PipelineConfig) -> Result<()> {
    let model = load_trained(config)?;
    let transcripts = test_transcripts(config)?;
    let r = config.r_policy()?;
    let mut reports: Vec<TranscriptReport> = Vec::new();
    for t in &transcripts {
        let sel = run_extraction(config, &model, t)?;
        if let Some(rep) = evaluate_transcript(t, &sel.sentence_scores, r, config.evaluation.overlap_threshold)? {
            reports.push(rep);
        }
    }
    let skipped = transcripts.len() - reports.len();
    write_jsonl(&config.paths.report("eval.jsonl"), &reports)?;
    let summary = macro_average(&reports)?;
    let strat = stratify(&reports, &config.evaluation.stratify);
    let record = json!({
        "sampler": config.sampling.sampler,
        "r": config.sampling.r,
        "evaluated": reports.len(),
        "skipped_single_class": skipped,
        "macro": summary,
    });
    write_json(&config.paths.report("eval_summary.json"), &record)?;
    write_json(&config.paths.report("stratified.json"), &strat)?;
    let table = strat.render_table();
    write_text(&config.paths.report("stratified.txt"), &table)?;
    println!("{record}");
    print!("{table}");
    Ok(())
}

pub fn drift(config: &PipelineConfig) -> Result<()> {
    let reports: Vec<TranscriptReport> = read_jsonl(&config.paths.report("eval.jsonl"))?;
    if reports.is_empty() {
        return Err(highlight_core::Error::Empty("no evaluation reports; run eval first").into());
    }
    let rows = temporal_drift(&reports, config.drift_bucket()?);
    write_jsonl(&config.paths.report("drift.jsonl"), &rows)?;
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    let mut text = format!("{:<12}{:>7}{:>10}{:>10}{:>10}\n", "bucket", "count", "mean", "min", "max");
    for r in &rows {
        writeln!(
            text,
            "{:<12}{:>7}{:>10}{:>10}{:>10}",
            r.bucket_start.format("%Y-%m-%d"),
            r.count,
            fmt(r.mean_auc),
            fmt(r.min_auc),
            fmt(r.max_auc)
        )?;
    }
    write_text(&config.paths.report("drift.txt"), &text)?;
    print!("{text}");
    Ok(())
}
