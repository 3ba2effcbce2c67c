//! Sequence-length covariate shift between clips and non-clips.
//!
//! Non-clips excised from transcripts are much longer than clips, which lets
//! a classifier cheat on length alone. [`redistribute`] cuts each non-clip
//! into consecutive pieces whose word counts are drawn from the clip length
//! distribution; [`ks_distance`] and [`length_drift_auc`] measure the shift
//! before and after.

use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{is_punct_token, LabeledExample, TokenSequence};
use crate::error::{Error, Result};
use crate::evaluation::auc_two_sample;
use crate::rng::{self, Rng};

/// Normalized histogram of word counts. Bin `k` holds counts in `[k*w, (k+1)*w)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthDistribution {
    pub bin_width: u32,
    pub bins: BTreeMap<u64, f64>,
}

impl LengthDistribution {
    pub fn from_lengths(lengths: impl IntoIterator<Item = usize>, bin_width: u32) -> Result<Self> {
        if bin_width == 0 {
            return Err(Error::InvalidInput("bin width must be positive".into()));
        }
        let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
        let mut total = 0u64;
        for len in lengths {
            *counts.entry(len as u64 / u64::from(bin_width)).or_default() += 1;
            total += 1;
        }
        if total == 0 {
            return Err(Error::Empty("length distribution needs at least one example"));
        }
        let bins = counts.into_iter().map(|(k, c)| (k, c as f64 / total as f64)).collect();
        Ok(LengthDistribution { bin_width, bins })
    }

    pub fn mass(&self, bin: u64) -> f64 {
        self.bins.get(&bin).copied().unwrap_or(0.0)
    }

    /// Inclusive range of positive word counts covered by a bin, if any.
    fn bin_lengths(&self, bin: u64) -> Option<(usize, usize)> {
        let w = u64::from(self.bin_width);
        let lo = (bin * w).max(1);
        let hi = bin * w + w - 1;
        (lo <= hi).then_some((lo as usize, hi as usize))
    }

    fn sampler(&self) -> Result<LengthSampler> {
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for (&bin, &mass) in &self.bins {
            if mass <= 0.0 {
                continue;
            }
            if let Some(range) = self.bin_lengths(bin) {
                acc += mass;
                cumulative.push((acc, range));
            }
        }
        if cumulative.is_empty() {
            return Err(Error::InvalidInput("target length distribution has no support on positive lengths".into()));
        }
        Ok(LengthSampler { cumulative, total: acc })
    }
}

struct LengthSampler {
    cumulative: Vec<(f64, (usize, usize))>,
    total: f64,
}

impl LengthSampler {
    /// Inverse-CDF over bins, then uniform within the chosen bin.
    fn draw(&self, rng: &mut Rng) -> usize {
        let u = rng.gen::<f64>() * self.total;
        let idx = self.cumulative.partition_point(|(c, _)| *c <= u);
        let (_, (lo, hi)) = self.cumulative[idx.min(self.cumulative.len() - 1)];
        if lo == hi {
            lo
        } else {
            rng.gen_range(lo..=hi)
        }
    }
}

/// Normalized word-count histogram of a set of examples.
pub fn length_distribution(examples: &[LabeledExample], bin_width: u32) -> Result<LengthDistribution> {
    LengthDistribution::from_lengths(examples.iter().map(|e| e.word_count), bin_width)
}

/// Integrated absolute difference between two length densities, in `[0, 2]`.
pub fn ks_distance(p: &LengthDistribution, q: &LengthDistribution) -> Result<f64> {
    if p.bin_width != q.bin_width {
        return Err(Error::BinWidthMismatch(p.bin_width, q.bin_width));
    }
    // density = mass / width, integrated over a bin of that width
    let mut d = 0.0;
    let mut keys: Vec<u64> = p.bins.keys().chain(q.bins.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    for k in keys {
        d += (p.mass(k) - q.mass(k)).abs();
    }
    Ok(d)
}

/// Cut every non-clip into consecutive pieces with word counts drawn from `target`.
///
/// For each source, lengths are drawn until their sum reaches the source word
/// count; the last piece is truncated to the remainder. Concatenating the
/// pieces of a source reproduces its tokens. Each source uses its own seeded
/// stream, so output does not depend on thread scheduling.
pub fn redistribute(
    nonclips: &[LabeledExample],
    target: &LengthDistribution,
    seed: u64,
) -> Result<Vec<LabeledExample>> {
    let sampler = target.sampler()?;
    let pieces: Vec<Vec<LabeledExample>> = nonclips
        .par_iter()
        .enumerate()
        .map(|(i, example)| {
            let mut rng = rng::substream(seed, "redistribute", i as u64);
            let mut counts = Vec::new();
            let mut sum = 0;
            while sum < example.word_count {
                let len = sampler.draw(&mut rng);
                counts.push(len);
                sum += len;
            }
            if let Some(last) = counts.last_mut() {
                *last -= sum - example.word_count;
            }
            split_by_word_counts(example, &counts)
        })
        .collect();
    Ok(pieces.into_iter().flatten().collect())
}

/// Split an example into consecutive pieces holding the given numbers of words.
///
/// Punctuation stays with the word before it; leading punctuation joins the
/// first piece. An example without words is returned whole.
pub fn split_by_word_counts(example: &LabeledExample, counts: &[usize]) -> Vec<LabeledExample> {
    if counts.len() <= 1 || example.word_count == 0 {
        return vec![example.clone()];
    }
    let tokens = &example.tokens.tokens;
    let mut pieces = Vec::with_capacity(counts.len());
    let mut start = 0;
    let mut cursor = 0;
    for (n, &count) in counts.iter().enumerate() {
        let last = n + 1 == counts.len();
        let end = if last {
            tokens.len()
        } else {
            let mut words = 0;
            let mut i = cursor;
            // advance past `count` words, then stop right before the next word
            while i < tokens.len() {
                if !is_punct_token(&tokens[i]) {
                    if words == count {
                        break;
                    }
                    words += 1;
                }
                i += 1;
            }
            i
        };
        let seq = TokenSequence {
            tokens: tokens[start..end].to_vec(),
            punct_mode: example.tokens.punct_mode,
            stemmed: example.tokens.stemmed,
        };
        pieces.push(LabeledExample::new(seq, example.source, example.origin_transcript.clone(), example.recorded_at));
        start = end;
        cursor = end;
    }
    pieces
}

/// How well sequence length alone separates `lengths_a` (positive) from
/// `lengths_b`: the Mann-Whitney AUC with ties counted as one half.
///
/// Any monotone single-feature classifier attains exactly this value, so 0.5
/// means length carries no class information.
pub fn length_drift_auc(lengths_a: &[usize], lengths_b: &[usize]) -> Result<f64> {
    if lengths_a.is_empty() || lengths_b.is_empty() {
        return Err(Error::Empty("length drift needs both classes"));
    }
    let a: Vec<f64> = lengths_a.iter().map(|&l| l as f64).collect();
    let b: Vec<f64> = lengths_b.iter().map(|&l| l as f64).collect();
    auc_two_sample(&a, &b)
}
