use serde::{Deserialize, Serialize};

use crate::corpus::Transcript;
use crate::interval::SuperClip;

pub const DEFAULT_OVERLAP_THRESHOLD: f64 = 0.75;

/// Sentence-level ground truth for one transcript.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthSet {
    pub transcript_id: String,
    pub labels: Vec<u8>,
}

impl TruthSet {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y != 0).count()
    }
}

/// Label a sentence 1 when more than `threshold` of its characters lie inside superclips.
///
/// Coverage is measured on the sentence with surrounding whitespace trimmed.
/// A fully covered sentence is always positive, so a threshold of 1.0 selects
/// exactly the fully covered sentences.
pub fn build_truth_set(transcript: &Transcript, superclips: &[SuperClip], threshold: f64) -> TruthSet {
    let labels = (0..transcript.sentences.len())
        .map(|i| {
            let Some(content) = transcript.sentence_content_span(i) else {
                return 0;
            };
            let covered: usize = superclips.iter().map(|c| c.span.intersection_len(&content)).sum();
            let ratio = covered as f64 / content.len() as f64;
            u8::from(ratio > threshold || covered == content.len())
        })
        .collect();
    TruthSet { transcript_id: transcript.id.clone(), labels }
}
