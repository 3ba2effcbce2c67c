//! Transcript ingestion, sentence segmentation, tokenization and synthetic corpora.

mod porter;
mod sentence;
pub mod stopwords;
mod synth;
mod tokenize;
mod transcript;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub use porter::stem as porter_stem;
pub use sentence::{split_sentences, Sentence};
pub use synth::{generate_synthetic_corpus, SynthParams, DEFAULT_BACKGROUND_VOCAB, DEFAULT_HIGHLIGHT_VOCAB};
pub use tokenize::{is_punct_token, stem_tokens, tokenize, PunctMode, TokenSequence};
pub use transcript::{parse_corpus, write_corpus, LineIssue, ParsedCorpus, Transcript};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Clip,
    Nonclip,
}

/// One training example: a clip or non-clip token sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub tokens: TokenSequence,
    pub source: Source,
    pub word_count: usize,
    pub origin_transcript: String,
    pub recorded_at: DateTime<Utc>,
}

impl LabeledExample {
    /// `word_count` is derived from the tokens.
    pub fn new(
        tokens: TokenSequence,
        source: Source,
        origin_transcript: impl Into<String>,
        recorded_at: DateTime<Utc>,
    ) -> Self {
        LabeledExample {
            word_count: tokens.word_count(),
            tokens,
            source,
            origin_transcript: origin_transcript.into(),
            recorded_at,
        }
    }

    /// 1 for clips, 0 for non-clips.
    pub fn label(&self) -> u8 {
        match self.source {
            Source::Clip => 1,
            Source::Nonclip => 0,
        }
    }
}
