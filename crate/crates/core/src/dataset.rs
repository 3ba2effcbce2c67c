//! Labeled training data from transcripts: superclips become clips, the text
//! left after excision becomes non-clips, and non-clips are re-cut to the
//! clip length distribution.

use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, LabeledExample, PunctMode, Source, Transcript};
use crate::distribution::{ks_distance, length_distribution, length_drift_auc, redistribute};
use crate::error::{Error, Result};
use crate::interval::{excise_nonclips, reduce_superclips};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    /// Word-count bin width for the length distributions.
    pub bin_width: u32,
    pub redistribute: bool,
    /// Share of transcripts held out for evaluation.
    pub test_fraction: f64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { bin_width: 1, redistribute: true, test_fraction: 0.2 }
    }
}

/// Length-shift diagnostics before and after redistribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub transcripts: usize,
    pub raw_clips: usize,
    pub clips: usize,
    pub nonclips_before: usize,
    pub nonclips_after: usize,
    pub ks_before: f64,
    pub ks_after: f64,
    pub drift_auc_before: f64,
    pub drift_auc_after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Clips in transcript order, then non-clips.
    pub examples: Vec<LabeledExample>,
    pub stats: DatasetStats,
}

/// Whether a transcript belongs to the held-out evaluation split.
///
/// Decided by a seeded hash of the id alone, so adding or removing other
/// transcripts never moves it.
pub fn is_test_transcript(id: &str, seed: u64, test_fraction: f64) -> bool {
    let h = rng::derive_seed(seed, "split", rng::stable_hash(id));
    ((h >> 11) as f64 / (1u64 << 53) as f64) < test_fraction
}

pub fn split_transcripts(
    transcripts: &[Transcript],
    seed: u64,
    test_fraction: f64,
) -> (Vec<Transcript>, Vec<Transcript>) {
    transcripts.iter().cloned().partition(|t| !is_test_transcript(&t.id, seed, test_fraction))
}

/// Clip and non-clip examples of one transcript, keep-mode tokens.
/// Pieces without words are dropped.
pub fn transcript_examples(t: &Transcript) -> (Vec<LabeledExample>, Vec<LabeledExample>) {
    let superclips = reduce_superclips(&t.clips);
    let make = |span, source| {
        let tokens = tokenize(t.slice(span), PunctMode::Keep);
        let e = LabeledExample::new(tokens, source, t.id.clone(), t.recorded_at);
        (e.word_count > 0).then_some(e)
    };
    let clips = superclips.iter().filter_map(|s| make(s.span, Source::Clip)).collect();
    let nonclips =
        excise_nonclips(t.char_len(), &superclips).into_iter().filter_map(|s| make(s, Source::Nonclip)).collect();
    (clips, nonclips)
}

fn word_counts(examples: &[LabeledExample]) -> Vec<usize> {
    examples.iter().map(|e| e.word_count).collect()
}

pub fn build_dataset(transcripts: &[Transcript], config: &DatasetConfig, seed: u64) -> Result<Dataset> {
    if transcripts.is_empty() {
        return Err(Error::Empty("no transcripts to build a dataset from"));
    }
    let mut clips = Vec::new();
    let mut nonclips = Vec::new();
    for t in transcripts {
        let (c, n) = transcript_examples(t);
        clips.extend(c);
        nonclips.extend(n);
    }
    if clips.is_empty() || nonclips.is_empty() {
        return Err(Error::Empty("dataset needs both clips and non-clips"));
    }
    let clip_dist = length_distribution(&clips, config.bin_width)?;
    let ks_before = ks_distance(&clip_dist, &length_distribution(&nonclips, config.bin_width)?)?;
    let drift_auc_before = length_drift_auc(&word_counts(&nonclips), &word_counts(&clips))?;
    let nonclips_before = nonclips.len();
    if config.redistribute {
        nonclips = redistribute(&nonclips, &clip_dist, rng::derive_seed(seed, "dataset", 0))?;
    }
    let ks_after = ks_distance(&clip_dist, &length_distribution(&nonclips, config.bin_width)?)?;
    let drift_auc_after = length_drift_auc(&word_counts(&nonclips), &word_counts(&clips))?;
    let stats = DatasetStats {
        transcripts: transcripts.len(),
        raw_clips: transcripts.iter().map(|t| t.clips.len()).sum(),
        clips: clips.len(),
        nonclips_before,
        nonclips_after: nonclips.len(),
        ks_before,
        ks_after,
        drift_auc_before,
        drift_auc_after,
    };
    clips.extend(nonclips);
    Ok(Dataset { examples: clips, stats })
}
