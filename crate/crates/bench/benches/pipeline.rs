use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use highlight_core::corpus::{generate_synthetic_corpus, tokenize, PunctMode, SynthParams};
use highlight_core::dataset::{build_dataset, DatasetConfig};
use highlight_core::interval::{reduce_superclips, Span};
use highlight_core::models::{lstm_forward, train_ensemble, EmbeddingSource, LstmConfig, LstmModel, TrainConfig};
use highlight_core::sampling::{extract, Sampler};

fn small_params() -> SynthParams {
    SynthParams { n_transcripts: 20, sentence_count_range: (30, 60), ..SynthParams::default() }
}

fn bench_intervals(c: &mut Criterion) {
    let spans: Vec<Span> = (0..10_000)
        .map(|i| {
            let start = (i * 7919) % 200_000;
            Span::new(start, start + 50 + i % 400)
        })
        .collect();
    c.bench_function("reduce_superclips_10k", |b| b.iter(|| reduce_superclips(black_box(&spans))));
}

fn bench_dataset(c: &mut Criterion) {
    let corpus = generate_synthetic_corpus(1, &small_params()).unwrap();
    c.bench_function("build_dataset_20_transcripts", |b| {
        b.iter(|| build_dataset(black_box(&corpus), &DatasetConfig::default(), 1).unwrap())
    });
}

fn bench_models(c: &mut Criterion) {
    let corpus = generate_synthetic_corpus(2, &small_params()).unwrap();
    let examples = build_dataset(&corpus, &DatasetConfig::default(), 2).unwrap().examples;
    let config = TrainConfig { folds: 3, ..TrainConfig::default() };
    let mut group = c.benchmark_group("models");
    group.sample_size(10);
    group.bench_function("gbm_ensemble_train", |b| {
        b.iter(|| train_ensemble(black_box(&examples), &config, None).unwrap())
    });

    let vocab: Vec<String> = (0..500).map(|i| format!("w{i}")).collect();
    let tokens = tokenize(&vocab[..100].join(" "), PunctMode::Strip);
    for (name, attention, bidirectional) in [("plain", false, false), ("attention_bi", true, true)] {
        let cfg = LstmConfig { attention, bidirectional, ..LstmConfig::default() };
        let model = LstmModel::new(cfg, EmbeddingSource::Trainable { vocab: vocab.clone() }, 0).unwrap();
        group.bench_function(format!("lstm_forward_100_{name}"), |b| {
            b.iter(|| lstm_forward(&model, black_box(&tokens)).unwrap())
        });
    }
    group.finish();
}

fn bench_sampling(c: &mut Criterion) {
    let corpus = generate_synthetic_corpus(
        3,
        &SynthParams { n_transcripts: 1, sentence_count_range: (120, 120), ..SynthParams::default() },
    )
    .unwrap();
    let scorer = |t: &highlight_core::corpus::TokenSequence| Ok(t.tokens.len() as f64 % 7.0 / 7.0);
    let mut group = c.benchmark_group("extract_120_sentences");
    for sampler in [Sampler::Hscore, Sampler::Possum] {
        group.bench_function(format!("{sampler:?}"), |b| {
            b.iter(|| extract(black_box(&corpus[0]), sampler, 3, 20, scorer).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_intervals, bench_dataset, bench_models, bench_sampling);
criterion_main!(benches);
