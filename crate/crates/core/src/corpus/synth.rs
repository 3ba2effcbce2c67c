//! Synthetic transcript corpora with planted highlight segments.
//!
//! Highlight sentences draw most of their words from a highlight vocabulary,
//! background sentences from a background vocabulary. Each planted segment is
//! recorded as one or more overlapping user clips, so superclip reduction has
//! real work to do.

use std::collections::BTreeSet;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::Transcript;
use crate::error::{Error, Result};
use crate::interval::Span;
use crate::rng::{self, Rng};

pub const DEFAULT_HIGHLIGHT_VOCAB: &[&str] = &[
    "love",
    "hate",
    "amazing",
    "terrible",
    "honestly",
    "frustrating",
    "favorite",
    "awful",
    "brilliant",
    "disappointed",
    "excited",
    "annoying",
    "perfect",
    "worst",
    "best",
    "incredible",
    "ridiculous",
    "delighted",
    "furious",
    "wonderful",
    "horrible",
    "fantastic",
    "confusing",
    "impressed",
    "obsessed",
    "regret",
    "thrilled",
    "painful",
    "genuinely",
    "absolutely",
    "seriously",
    "trust",
    "overpriced",
    "cheap",
    "convenient",
    "stressful",
    "enjoy",
    "hated",
    "loved",
    "recommend",
    "never",
    "always",
    "switch",
    "wish",
    "really",
    "product",
    "price",
    "feel",
];

pub const DEFAULT_BACKGROUND_VOCAB: &[&str] = &[
    "um",
    "so",
    "then",
    "next",
    "question",
    "we",
    "the",
    "and",
    "okay",
    "moving",
    "on",
    "section",
    "time",
    "minutes",
    "name",
    "introduce",
    "work",
    "morning",
    "today",
    "going",
    "talk",
    "about",
    "screen",
    "share",
    "everyone",
    "can",
    "hear",
    "participant",
    "moderator",
    "topic",
    "discuss",
    "follow",
    "agenda",
    "break",
    "start",
    "yes",
    "right",
    "let's",
    "see",
    "number",
    "page",
    "card",
    "slide",
    "group",
    "you",
    "it",
    "is",
    "a",
    "of",
    "to",
    "really",
    "product",
    "price",
    "feel",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub n_transcripts: usize,
    /// Inclusive range of sentences per transcript.
    pub sentence_count_range: (usize, usize),
    /// Inclusive range of words per sentence.
    pub words_per_sentence: (usize, usize),
    /// Inclusive range of sentences per planted highlight segment.
    pub segment_sentences: (usize, usize),
    pub highlight_vocab: Vec<String>,
    pub background_vocab: Vec<String>,
    /// Target fraction of characters inside clips.
    pub planted_h_coverage: f64,
    /// When non-empty, each transcript picks its target coverage uniformly from these centers.
    pub coverage_mix: Vec<f64>,
    /// Half-width of the uniform jitter added to each transcript's target coverage.
    pub coverage_jitter: f64,
    /// Probability that a word in a highlight sentence comes from the highlight vocabulary.
    pub highlight_purity: f64,
    /// Probability that a word in a background sentence comes from the highlight vocabulary.
    pub background_leak: f64,
    pub start: DateTime<Utc>,
    pub span_days: i64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            n_transcripts: 100,
            sentence_count_range: (40, 120),
            words_per_sentence: (6, 14),
            segment_sentences: (1, 4),
            highlight_vocab: DEFAULT_HIGHLIGHT_VOCAB.iter().map(|s| s.to_string()).collect(),
            background_vocab: DEFAULT_BACKGROUND_VOCAB.iter().map(|s| s.to_string()).collect(),
            planted_h_coverage: 0.3,
            coverage_mix: Vec::new(),
            coverage_jitter: 0.0,
            highlight_purity: 0.75,
            background_leak: 0.04,
            start: Utc.with_ymd_and_hms(2016, 1, 1, 0, 0, 0).unwrap(),
            span_days: 3 * 365,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        let coverages = self.coverage_mix.iter().chain(std::iter::once(&self.planted_h_coverage));
        for &c in coverages {
            if !(0.0..=1.0).contains(&c) {
                return bad(&format!("coverage {c} outside [0, 1]"));
            }
        }
        if self.highlight_vocab.is_empty() || self.background_vocab.is_empty() {
            return bad("vocabularies must be non-empty");
        }
        let h: BTreeSet<&str> = self.highlight_vocab.iter().map(String::as_str).collect();
        let b: BTreeSet<&str> = self.background_vocab.iter().map(String::as_str).collect();
        let shared = h.intersection(&b).count();
        if 2 * shared > h.len().min(b.len()) {
            return bad("highlight and background vocabularies must be at least 50% disjoint");
        }
        let ranges = [self.sentence_count_range, self.words_per_sentence, self.segment_sentences];
        if ranges.iter().any(|&(lo, hi)| lo == 0 || lo > hi) {
            return bad("ranges must satisfy 1 <= min <= max");
        }
        if !(0.0..=1.0).contains(&self.highlight_purity) || !(0.0..=1.0).contains(&self.background_leak) {
            return bad("purity and leak must be probabilities");
        }
        if self.span_days < 1 {
            return bad("span_days must be positive");
        }
        Ok(())
    }
}

fn mean_len(vocab: &[String]) -> f64 {
    vocab.iter().map(|w| w.chars().count() as f64).sum::<f64>() / vocab.len() as f64
}

/// Generate a reproducible synthetic corpus.
pub fn generate_synthetic_corpus(seed: u64, params: &SynthParams) -> Result<Vec<Transcript>> {
    params.validate()?;
    (0..params.n_transcripts).map(|i| generate_one(seed, i, params)).collect()
}

fn generate_one(seed: u64, index: usize, p: &SynthParams) -> Result<Transcript> {
    let mut rng = rng::substream(seed, "synth", index as u64);
    let n = rng.gen_range(p.sentence_count_range.0..=p.sentence_count_range.1);

    let mut coverage = if p.coverage_mix.is_empty() {
        p.planted_h_coverage
    } else {
        *p.coverage_mix.choose(&mut rng).expect("non-empty")
    };
    if p.coverage_jitter > 0.0 {
        coverage += rng.gen_range(-p.coverage_jitter..=p.coverage_jitter);
    }
    let coverage = coverage.clamp(0.0, 1.0);

    // Highlight words are longer on average, so convert the character target
    // into a sentence fraction using expected sentence lengths.
    let (mh, mb) = (mean_len(&p.highlight_vocab), mean_len(&p.background_vocab));
    let words = (p.words_per_sentence.0 + p.words_per_sentence.1) as f64 / 2.0;
    let sentence_chars = |w_h: f64| words * (w_h * mh + (1.0 - w_h) * mb + 1.0) + 1.0;
    let (lh, lb) = (sentence_chars(p.highlight_purity), sentence_chars(p.background_leak));
    let fraction = if coverage >= 1.0 { 1.0 } else { coverage * lb / (coverage * lb + (1.0 - coverage) * lh) };
    let n_highlight = ((fraction * n as f64).round() as usize).min(n);

    let mut segments = Vec::new();
    let mut remaining = n_highlight;
    while remaining > 0 {
        let len = rng.gen_range(p.segment_sentences.0..=p.segment_sentences.1).min(remaining);
        segments.push(len);
        remaining -= len;
    }
    let gaps = split_background(&mut rng, n - n_highlight, segments.len());

    // (first sentence, sentence count) per planted segment
    let mut is_highlight = Vec::with_capacity(n);
    let mut planted = Vec::with_capacity(segments.len());
    for (k, gap) in gaps.iter().enumerate() {
        is_highlight.extend(std::iter::repeat_n(false, *gap));
        if let Some(&len) = segments.get(k) {
            planted.push((is_highlight.len(), len));
            is_highlight.extend(std::iter::repeat_n(true, len));
        }
    }

    let mut starts = Vec::with_capacity(n + 1);
    let mut text = String::new();
    let mut char_len = 0;
    for (i, &hl) in is_highlight.iter().enumerate() {
        if i > 0 {
            text.push(' ');
            char_len += 1;
        }
        starts.push(char_len);
        let sentence = render_sentence(&mut rng, p, hl);
        char_len += sentence.chars().count();
        text.push_str(&sentence);
    }
    starts.push(char_len);
    // A sentence span runs to the next sentence start, trailing space included.
    let span_of = |first: usize, count: usize| Span::new(starts[first], starts[first + count]);

    let mut clips = Vec::new();
    for &(first, len) in &planted {
        clips.push(span_of(first, len));
        if rng.gen_bool(0.5) {
            let a = rng.gen_range(0..len);
            let b = rng.gen_range(a..len);
            clips.push(span_of(first + a, b - a + 1));
        }
        if rng.gen_bool(0.25) {
            clips.push(span_of(first, len));
        }
    }
    clips.shuffle(&mut rng);

    let seconds = rng.gen_range(0..p.span_days * 86_400);
    let recorded_at = p.start + Duration::seconds(seconds);
    Transcript::new(format!("doc-{index:05}"), text, recorded_at, clips)
}

/// Distribute `total` background sentences over `segments + 1` gaps with
/// exponentially distributed weights; interior gaps get at least one sentence
/// when there are enough to go around.
fn split_background(rng: &mut Rng, total: usize, segments: usize) -> Vec<usize> {
    let mut gaps = vec![0usize; segments + 1];
    let mut left = total;
    if segments > 1 && total >= segments - 1 {
        for g in &mut gaps[1..segments] {
            *g = 1;
        }
        left -= segments - 1;
    }
    let weights: Vec<f64> = (0..=segments).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let sum: f64 = weights.iter().sum();
    for _ in 0..left {
        let mut target = rng.gen::<f64>() * sum;
        let mut chosen = segments;
        for (k, w) in weights.iter().enumerate() {
            if target < *w {
                chosen = k;
                break;
            }
            target -= w;
        }
        gaps[chosen] += 1;
    }
    gaps
}

fn render_sentence(rng: &mut Rng, p: &SynthParams, highlight: bool) -> String {
    let n_words = rng.gen_range(p.words_per_sentence.0..=p.words_per_sentence.1);
    let from_highlight = if highlight { p.highlight_purity } else { p.background_leak };
    let mut out = String::new();
    for w in 0..n_words {
        let vocab = if rng.gen_bool(from_highlight) { &p.highlight_vocab } else { &p.background_vocab };
        let word = vocab.choose(rng).expect("non-empty vocab");
        if w == 0 {
            let mut chars = word.chars();
            if let Some(c) = chars.next() {
                out.extend(c.to_uppercase());
                out.push_str(chars.as_str());
            }
        } else {
            out.push(' ');
            out.push_str(word);
        }
    }
    let roll: f64 = rng.gen();
    let terminal = match (highlight, roll) {
        (true, r) if r < 0.3 => '!',
        (true, r) if r < 0.4 => '?',
        (false, r) if r < 0.15 => '?',
        _ => '.',
    };
    out.push(terminal);
    out
}
