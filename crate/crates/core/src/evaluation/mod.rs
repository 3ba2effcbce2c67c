//! Sentence-level truth sets, ranking metrics and aggregate reports.

mod metrics;
mod report;
mod truth;

use serde::{Deserialize, Serialize};

pub use metrics::{auc_two_sample, precision_recall_at_r, roc_auc, PrecisionRecall};
pub use report::{
    macro_average, stratify, temporal_drift, DriftBucket, DriftRow, MacroAverage, StratCell, StratifiedReport,
    StratifyConfig, TranscriptReport,
};
pub use truth::{build_truth_set, TruthSet, DEFAULT_OVERLAP_THRESHOLD};

use crate::corpus::{tokenize, PunctMode, Transcript};
use crate::error::{Error, Result};
use crate::interval::{h_coverage, reduce_superclips};

/// How many top sentences count as predicted highlights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RPolicy {
    /// The number of true highlight sentences in each transcript.
    Oracle,
    Fixed(usize),
}

impl std::str::FromStr for RPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "oracle" {
            return Ok(RPolicy::Oracle);
        }
        s.parse::<usize>()
            .ok()
            .filter(|&r| r > 0)
            .map(RPolicy::Fixed)
            .ok_or_else(|| Error::InvalidInput(format!("R must be a positive integer or \"oracle\", got {s:?}")))
    }
}

/// Score one transcript's sentence ranking against its clips.
///
/// Returns `None` when the truth set has a single class, where ROC AUC is undefined.
pub fn evaluate_transcript(
    transcript: &Transcript,
    sentence_scores: &[f64],
    r: RPolicy,
    overlap_threshold: f64,
) -> Result<Option<TranscriptReport>> {
    let superclips = reduce_superclips(&transcript.clips);
    let truth = build_truth_set(transcript, &superclips, overlap_threshold);
    let positives = truth.positives();
    if positives == 0 || positives == truth.labels.len() {
        return Ok(None);
    }
    let r = match r {
        RPolicy::Oracle => positives,
        RPolicy::Fixed(r) => r,
    };
    let pr = precision_recall_at_r(sentence_scores, &truth.labels, r)?;
    Ok(Some(TranscriptReport {
        transcript_id: transcript.id.clone(),
        precision: pr.precision,
        recall: pr.recall,
        roc_auc: roc_auc(sentence_scores, &truth.labels)?,
        h_coverage: h_coverage(transcript.char_len(), &superclips)?,
        length_words: tokenize(&transcript.text, PunctMode::Strip).len(),
        recorded_at: transcript.recorded_at,
    }))
}
