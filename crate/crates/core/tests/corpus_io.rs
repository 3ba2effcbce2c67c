use highlight_core::corpus::{generate_synthetic_corpus, parse_corpus, write_corpus, SynthParams};
use highlight_core::dataset::{build_dataset, split_transcripts, DatasetConfig};
use proptest::prelude::*;

fn small() -> SynthParams {
    SynthParams { n_transcripts: 6, sentence_count_range: (5, 15), ..SynthParams::default() }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn corpus_survives_write_and_parse(seed in any::<u64>()) {
        let corpus = generate_synthetic_corpus(seed, &small()).unwrap();
        let mut buf = Vec::new();
        write_corpus(&mut buf, &corpus).unwrap();
        let parsed = parse_corpus(buf.as_slice()).unwrap();
        prop_assert!(parsed.warnings.is_empty() && parsed.skipped.is_empty());
        prop_assert_eq!(parsed.transcripts, corpus);
    }

    #[test]
    fn split_partitions_transcripts(seed in any::<u64>(), frac in 0.0f64..1.0) {
        let corpus = generate_synthetic_corpus(seed, &small()).unwrap();
        let (train, test) = split_transcripts(&corpus, seed, frac);
        prop_assert_eq!(train.len() + test.len(), corpus.len());
        prop_assert!(train.iter().all(|t| !test.iter().any(|u| u.id == t.id)));
    }
}

#[test]
fn dataset_examples_come_from_their_transcripts() {
    let corpus = generate_synthetic_corpus(4, &small()).unwrap();
    let d = build_dataset(&corpus, &DatasetConfig::default(), 4).unwrap();
    assert_eq!(d.stats.clips + d.stats.nonclips_after, d.examples.len());
    for e in &d.examples {
        let t = corpus.iter().find(|t| t.id == e.origin_transcript).unwrap();
        assert_eq!(t.recorded_at, e.recorded_at);
        assert!(e.word_count > 0);
    }
}
