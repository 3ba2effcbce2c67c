//! Fragment enumeration and the four selection algorithms.
//!
//! A fragment is a window of consecutive sentences. Set-based samplers
//! (`hscore`, `hscorelength`) pick disjoint fragments greedily; sentence-based
//! samplers (`seq11`, `possum`) produce one score per sentence. Every
//! [`SelectionResult`] carries per-sentence scores so evaluation treats all
//! samplers alike: set-based selections project each selected fragment's
//! h-score onto its sentences and give every other sentence -1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{tokenize, PunctMode, TokenSequence, Transcript};
use crate::error::{Error, Result};

pub const DEFAULT_NI: usize = 3;
pub const DEFAULT_NF: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fragment {
    pub transcript_id: String,
    pub start_sentence: usize,
    /// Inclusive.
    pub end_sentence: usize,
    pub length_sentences: usize,
    pub tokens: TokenSequence,
}

impl Fragment {
    pub fn new(transcript_id: impl Into<String>, start: usize, end: usize, tokens: TokenSequence) -> Self {
        assert!(start <= end, "fragment start after end");
        Fragment {
            transcript_id: transcript_id.into(),
            start_sentence: start,
            end_sentence: end,
            length_sentences: end - start + 1,
            tokens,
        }
    }

    pub fn overlaps(&self, other: &Fragment) -> bool {
        self.start_sentence <= other.end_sentence && other.start_sentence <= self.end_sentence
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredFragment {
    pub fragment: Fragment,
    pub h_score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampler {
    Seq11,
    Hscore,
    Hscorelength,
    Possum,
}

impl std::str::FromStr for Sampler {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seq11" => Ok(Sampler::Seq11),
            "hscore" => Ok(Sampler::Hscore),
            "hscorelength" => Ok(Sampler::Hscorelength),
            "possum" => Ok(Sampler::Possum),
            other => Err(Error::InvalidInput(format!("unknown sampler {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub sampler: Sampler,
    /// Kept fragments of set-based samplers, in selection order. Empty otherwise.
    pub selected: Vec<ScoredFragment>,
    pub sentence_scores: Vec<f64>,
}

/// Sentence windows `(start, end_inclusive)` with `n_i < length <= n_f`, ordered by (start, length).
///
/// A document with fewer than `n_i + 1` sentences yields its single full window.
pub fn enumerate_windows(n_sentences: usize, n_i: usize, n_f: usize) -> Result<Vec<(usize, usize)>> {
    if n_i >= n_f {
        return Err(Error::InvalidInput(format!("need n_i < n_f, got {n_i} and {n_f}")));
    }
    if n_sentences == 0 {
        return Ok(Vec::new());
    }
    if n_sentences <= n_i {
        return Ok(vec![(0, n_sentences - 1)]);
    }
    let mut windows = Vec::new();
    for start in 0..n_sentences {
        for len in (n_i + 1)..=n_f {
            if start + len > n_sentences {
                break;
            }
            windows.push((start, start + len - 1));
        }
    }
    Ok(windows)
}

/// Closed-form fragment count: the sum over lengths `L` in `(n_i, n_f]` of `max(0, N - L + 1)`.
pub fn fragment_count(n_sentences: usize, n_i: usize, n_f: usize) -> usize {
    ((n_i + 1)..=n_f).map(|l| (n_sentences + 1).saturating_sub(l)).sum()
}

/// Keep-mode tokens of every sentence of a transcript.
pub fn sentence_tokens(transcript: &Transcript) -> Vec<TokenSequence> {
    (0..transcript.sentences.len()).map(|i| tokenize(transcript.sentence_text(i), PunctMode::Keep)).collect()
}

/// All fragments of a transcript per [`enumerate_windows`], with their tokens.
pub fn enumerate_fragments(transcript: &Transcript, n_i: usize, n_f: usize) -> Result<Vec<Fragment>> {
    let per_sentence = sentence_tokens(transcript);
    Ok(enumerate_windows(per_sentence.len(), n_i, n_f)?
        .into_iter()
        .map(|(s, e)| {
            Fragment::new(transcript.id.clone(), s, e, TokenSequence::concat(&per_sentence[s..=e], PunctMode::Keep))
        })
        .collect())
}

/// Score every sentence as its own fragment.
pub fn sample_seq11<F>(transcript: &Transcript, scorer: F) -> Result<SelectionResult>
where
    F: Fn(&TokenSequence) -> Result<f64> + Sync,
{
    let sentence_scores = sentence_tokens(transcript).par_iter().map(&scorer).collect::<Result<Vec<f64>>>()?;
    Ok(SelectionResult { sampler: Sampler::Seq11, selected: Vec::new(), sentence_scores })
}

fn greedy_disjoint(scored: &[ScoredFragment], key: impl Fn(&ScoredFragment) -> f64) -> Vec<ScoredFragment> {
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (&scored[a].fragment, &scored[b].fragment);
        key(&scored[b])
            .total_cmp(&key(&scored[a]))
            .then(fa.start_sentence.cmp(&fb.start_sentence))
            .then(fa.length_sentences.cmp(&fb.length_sentences))
    });
    let extent = scored.iter().map(|s| s.fragment.end_sentence + 1).max().unwrap_or(0);
    let mut occupied = vec![false; extent];
    let mut kept = Vec::new();
    for i in order {
        let f = &scored[i].fragment;
        let range = f.start_sentence..=f.end_sentence;
        if occupied[range.clone()].iter().all(|&o| !o) {
            occupied[range].fill(true);
            kept.push(scored[i].clone());
        }
    }
    kept
}

/// Per-sentence projection of a set-based selection: selected sentences take
/// their fragment's h-score, all others -1.
pub fn project_selection(selected: &[ScoredFragment], sentence_count: usize) -> Vec<f64> {
    let mut scores = vec![-1.0; sentence_count];
    for s in selected {
        let end = s.fragment.end_sentence.min(sentence_count.saturating_sub(1));
        for v in scores.iter_mut().take(end + 1).skip(s.fragment.start_sentence) {
            *v = s.h_score;
        }
    }
    scores
}

/// Greedy non-overlapping selection by descending h-score.
pub fn sample_hscore(scored: &[ScoredFragment], sentence_count: usize) -> SelectionResult {
    let selected = greedy_disjoint(scored, |s| s.h_score);
    SelectionResult {
        sampler: Sampler::Hscore,
        sentence_scores: project_selection(&selected, sentence_count),
        selected,
    }
}

/// Greedy non-overlapping selection by descending h-score times length.
pub fn sample_hscore_length(scored: &[ScoredFragment], sentence_count: usize) -> SelectionResult {
    let selected = greedy_disjoint(scored, |s| s.h_score * s.fragment.length_sentences as f64);
    SelectionResult {
        sampler: Sampler::Hscorelength,
        sentence_scores: project_selection(&selected, sentence_count),
        selected,
    }
}

/// Mean h-score of the positively scored fragments covering each sentence; 0 where none do.
pub fn sample_possum(scored: &[ScoredFragment], sentence_count: usize) -> SelectionResult {
    let mut positive: Vec<(usize, usize, f64)> = scored
        .iter()
        .filter(|s| s.h_score > 0.0)
        .map(|s| (s.fragment.start_sentence, s.fragment.end_sentence, s.h_score))
        .collect();
    // canonical order makes the floating-point sums independent of input order
    positive.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    let mut sums = vec![0.0; sentence_count];
    let mut counts = vec![0usize; sentence_count];
    for (start, end, h) in positive {
        for i in start..=end.min(sentence_count.saturating_sub(1)) {
            sums[i] += h;
            counts[i] += 1;
        }
    }
    let sentence_scores = sums.iter().zip(&counts).map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 }).collect();
    SelectionResult { sampler: Sampler::Possum, selected: Vec::new(), sentence_scores }
}

/// Enumerate, score and select fragments of one transcript.
pub fn extract<F>(
    transcript: &Transcript,
    sampler: Sampler,
    n_i: usize,
    n_f: usize,
    scorer: F,
) -> Result<SelectionResult>
where
    F: Fn(&TokenSequence) -> Result<f64> + Sync,
{
    if sampler == Sampler::Seq11 {
        return sample_seq11(transcript, scorer);
    }
    let fragments = enumerate_fragments(transcript, n_i, n_f)?;
    let scored = fragments
        .into_par_iter()
        .map(|fragment| {
            let h_score = scorer(&fragment.tokens)?;
            Ok(ScoredFragment { fragment, h_score })
        })
        .collect::<Result<Vec<_>>>()?;
    let n = transcript.sentences.len();
    Ok(match sampler {
        Sampler::Hscore => sample_hscore(&scored, n),
        Sampler::Hscorelength => sample_hscore_length(&scored, n),
        Sampler::Possum => sample_possum(&scored, n),
        Sampler::Seq11 => unreachable!(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use chrono::Utc;
    use proptest::prelude::*;
    use rand::Rng as _;

    fn frag(start: usize, end: usize, h: f64) -> ScoredFragment {
        ScoredFragment {
            fragment: Fragment::new("t", start, end, TokenSequence::new(Vec::new(), PunctMode::Keep)),
            h_score: h,
        }
    }

    fn spans(sel: &SelectionResult) -> Vec<(usize, usize)> {
        sel.selected.iter().map(|s| (s.fragment.start_sentence, s.fragment.end_sentence)).collect()
    }

    #[test]
    fn window_counts() {
        // lengths 4 and 5: 7 + 6 windows
        assert_eq!(enumerate_windows(10, 3, 5).unwrap().len(), 13);
        assert_eq!(enumerate_windows(2, 3, 5).unwrap(), vec![(0, 1)]);
        assert!(enumerate_windows(5, 3, 3).is_err());
        let big = enumerate_windows(1000, 3, 20).unwrap();
        let mut brute = 0;
        for s in 0..1000 {
            for e in s..1000 {
                let l = e - s + 1;
                if l > 3 && l <= 20 {
                    brute += 1;
                }
            }
        }
        assert_eq!(big.len(), brute);
        assert_eq!(big.len(), fragment_count(1000, 3, 20));
    }

    #[test]
    fn windows_ordered_and_unique() {
        let w = enumerate_windows(30, 2, 7).unwrap();
        let mut sorted = w.clone();
        sorted.sort_by_key(|&(s, e)| (s, e - s));
        sorted.dedup();
        assert_eq!(w, sorted);
    }

    #[test]
    fn fragments_carry_sentence_tokens() {
        let t = Transcript::new("d", "One two. Three! Four five six?", Utc::now(), vec![]).unwrap();
        let f = enumerate_fragments(&t, 1, 2).unwrap();
        assert_eq!(f.len(), 2);
        assert_eq!(f[0].tokens.tokens, ["one", "two", ".", "three", "!"]);
    }

    #[test]
    fn seq11_scores_each_sentence() {
        let t = Transcript::new("d", "A b. C d. E f.", Utc::now(), vec![]).unwrap();
        let sel = sample_seq11(&t, |_| Ok(0.25)).unwrap();
        assert_eq!(sel.sentence_scores, vec![0.25; 3]);
    }

    #[test]
    fn hscore_hand_trace() {
        let scored = [frag(1, 5, 0.9), frag(3, 7, 0.8), frag(6, 9, 0.7)];
        let sel = sample_hscore(&scored, 10);
        assert_eq!(spans(&sel), vec![(1, 5), (6, 9)]);
        assert_eq!(sel.sentence_scores[0], -1.0);
        assert_eq!(sel.sentence_scores[5], 0.9);
        assert_eq!(sel.sentence_scores[6], 0.7);
        assert_eq!(spans(&sample_hscore(&[frag(0, 1, 0.1), frag(3, 4, 0.2)], 5)).len(), 2);
        assert!(sample_hscore(&[], 3).selected.is_empty());
    }

    #[test]
    fn hscore_length_prefers_longer() {
        let sel = sample_hscore_length(&[frag(0, 2, 0.5), frag(1, 8, 0.5)], 10);
        assert_eq!(spans(&sel), vec![(1, 8)]);
        let neg = sample_hscore_length(&[frag(0, 0, -0.5), frag(0, 5, -0.5)], 10);
        assert_eq!(spans(&neg), vec![(0, 0)]);
    }

    #[test]
    fn possum_examples() {
        assert_eq!(sample_possum(&[frag(0, 2, -0.3), frag(1, 3, 0.0)], 4).sentence_scores, vec![0.0; 4]);
        assert_eq!(sample_possum(&[frag(2, 4, 0.6)], 6).sentence_scores, vec![0.0, 0.0, 0.6, 0.6, 0.6, 0.0]);
    }

    /// Independent greedy oracle: repeatedly take the best remaining fragment
    /// that overlaps nothing chosen so far.
    fn greedy_oracle(scored: &[ScoredFragment], key: impl Fn(&ScoredFragment) -> f64) -> Vec<(usize, usize)> {
        let mut remaining: Vec<&ScoredFragment> = scored.iter().collect();
        let mut chosen: Vec<(usize, usize)> = Vec::new();
        loop {
            remaining
                .retain(|s| chosen.iter().all(|&(a, b)| s.fragment.end_sentence < a || s.fragment.start_sentence > b));
            let best = remaining.iter().copied().reduce(|x, y| {
                let (kx, ky) = (key(x), key(y));
                let better = ky > kx
                    || (ky == kx && y.fragment.start_sentence < x.fragment.start_sentence)
                    || (ky == kx
                        && y.fragment.start_sentence == x.fragment.start_sentence
                        && y.fragment.length_sentences < x.fragment.length_sentences);
                if better {
                    y
                } else {
                    x
                }
            });
            match best {
                Some(b) => chosen.push((b.fragment.start_sentence, b.fragment.end_sentence)),
                None => return chosen,
            }
        }
    }

    #[test]
    fn greedy_matches_oracle_on_small_docs() {
        for n in 1..=12 {
            for k in 0..20 {
                let mut rng = rng::substream(n as u64, "greedy", k);
                let scored: Vec<_> = enumerate_windows(n, 0, 4)
                    .unwrap()
                    .into_iter()
                    .map(|(s, e)| frag(s, e, f64::from(rng.gen_range(-4..5)) / 4.0))
                    .collect();
                assert_eq!(spans(&sample_hscore(&scored, n)), greedy_oracle(&scored, |s| s.h_score));
                assert_eq!(
                    spans(&sample_hscore_length(&scored, n)),
                    greedy_oracle(&scored, |s| s.h_score * s.fragment.length_sentences as f64)
                );
            }
        }
    }

    proptest! {
        #[test]
        fn selections_are_disjoint_and_locally_maximal(
            n in 1usize..25,
            seed in 0u64..500,
        ) {
            let mut rng = rng::substream(seed, "prop", 0);
            let scored: Vec<_> = enumerate_windows(n, 0, 5).unwrap().into_iter()
                .map(|(s, e)| frag(s, e, rng.gen_range(-1.0..1.0))).collect();
            let sel = sample_hscore(&scored, n);
            for (i, a) in sel.selected.iter().enumerate() {
                for b in &sel.selected[i + 1..] {
                    prop_assert!(!a.fragment.overlaps(&b.fragment));
                }
            }
            // every rejected fragment is blocked by a kept one ranked at least as high
            for s in &scored {
                if !sel.selected.iter().any(|k| k.fragment == s.fragment) {
                    prop_assert!(sel.selected.iter().any(|k| k.fragment.overlaps(&s.fragment) && k.h_score >= s.h_score));
                }
            }
            // rank-only dependence
            let squashed: Vec<_> = scored.iter().map(|s| ScoredFragment { h_score: s.h_score.tanh() * 3.0 + 1.0, ..s.clone() }).collect();
            prop_assert_eq!(spans(&sel), spans(&sample_hscore(&squashed, n)));
            prop_assert_eq!(spans(&sample_hscore_length(&scored, n)),
                spans(&sample_hscore_length(&scored.iter().map(|s| ScoredFragment { h_score: s.h_score * 2.5, ..s.clone() }).collect::<Vec<_>>(), n)));
        }

        #[test]
        fn possum_matches_oracle_and_ignores_order(
            n in 1usize..13,
            seed in 0u64..500,
        ) {
            let mut rng = rng::substream(seed, "possum", 0);
            let mut scored: Vec<_> = enumerate_windows(n, 0, 4).unwrap().into_iter()
                .map(|(s, e)| frag(s, e, rng.gen_range(-1.0..1.0))).collect();
            let got = sample_possum(&scored, n).sentence_scores;
            for (i, &g) in got.iter().enumerate() {
                let cover: Vec<f64> = scored.iter()
                    .filter(|s| s.h_score > 0.0 && s.fragment.start_sentence <= i && i <= s.fragment.end_sentence)
                    .map(|s| s.h_score).collect();
                let want = if cover.is_empty() { 0.0 } else { cover.iter().sum::<f64>() / cover.len() as f64 };
                prop_assert!((g - want).abs() < 1e-9);
            }
            scored.reverse();
            prop_assert_eq!(got, sample_possum(&scored, n).sentence_scores);
        }
    }
}
