//! Clip intervals: superclip reduction, non-clip excision and h-coverage.
//!
//! Offsets are character offsets into a transcript's text. Two spans belong to
//! the same superclip when they share at least one character.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open character interval `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    /// Panics if `start >= end`.
    pub fn new(start: usize, end: usize) -> Self {
        assert!(start < end, "empty or inverted span {start}..{end}");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// True when the spans share at least one character.
    pub fn overlaps(&self, other: &Span) -> bool {
        self.start < other.end && other.start < self.end
    }

    pub fn contains(&self, other: &Span) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// Number of characters shared with `other`.
    pub fn intersection_len(&self, other: &Span) -> usize {
        let lo = self.start.max(other.start);
        let hi = self.end.min(other.end);
        hi.saturating_sub(lo)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperClip {
    pub span: Span,
    /// Number of user clips merged into this superclip.
    pub multiplicity: usize,
}

/// Merge clips into the connected components of their overlap graph.
///
/// Output is sorted by start and pairwise disjoint. Spans that merely touch
/// (`a.end == b.start`) stay separate.
pub fn reduce_superclips(clips: &[Span]) -> Vec<SuperClip> {
    let mut sorted = clips.to_vec();
    sorted.sort_unstable();

    let mut out: Vec<SuperClip> = Vec::new();
    for span in sorted {
        match out.last_mut() {
            Some(last) if span.start < last.span.end => {
                last.span.end = last.span.end.max(span.end);
                last.multiplicity += 1;
            }
            _ => out.push(SuperClip { span, multiplicity: 1 }),
        }
    }
    out
}

/// Maximal gaps of `[0, doc_length)` not covered by any superclip.
pub fn excise_nonclips(doc_length: usize, superclips: &[SuperClip]) -> Vec<Span> {
    let mut gaps = Vec::new();
    let mut cursor = 0;
    for sc in superclips {
        if sc.span.start > cursor {
            gaps.push(Span::new(cursor, sc.span.start));
        }
        cursor = cursor.max(sc.span.end);
    }
    if cursor < doc_length {
        gaps.push(Span::new(cursor, doc_length));
    }
    gaps
}

/// Fraction of the document covered by superclips.
pub fn h_coverage(doc_length: usize, superclips: &[SuperClip]) -> Result<f64> {
    if doc_length == 0 {
        return Err(Error::InvalidInput("h-coverage of a zero-length document is undefined".into()));
    }
    let covered: usize = superclips.iter().map(|sc| sc.span.len()).sum();
    Ok(covered as f64 / doc_length as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spans(v: &[(usize, usize)]) -> Vec<Span> {
        v.iter().map(|&(s, e)| Span::new(s, e)).collect()
    }

    /// Repeatedly merge any overlapping pair until nothing changes.
    fn fixpoint_merge(clips: &[Span]) -> Vec<(Span, usize)> {
        let mut groups: Vec<(Span, usize)> = clips.iter().map(|&s| (s, 1)).collect();
        loop {
            let mut merged = false;
            'outer: for i in 0..groups.len() {
                for j in (i + 1)..groups.len() {
                    if groups[i].0.overlaps(&groups[j].0) {
                        let (b, m) = groups.remove(j);
                        let a = &mut groups[i];
                        a.0 = Span::new(a.0.start.min(b.start), a.0.end.max(b.end));
                        a.1 += m;
                        merged = true;
                        break 'outer;
                    }
                }
            }
            if !merged {
                break;
            }
        }
        groups.sort();
        groups
    }

    #[test]
    fn string_analog_reduces_to_two_superclips() {
        // f a b c d e h i j at offsets 0..9
        let clips = spans(&[(1, 4), (3, 6), (0, 3), (6, 9), (1, 3), (1, 2)]);
        let out = reduce_superclips(&clips);
        assert_eq!(
            out,
            vec![
                SuperClip { span: Span::new(0, 6), multiplicity: 5 },
                SuperClip { span: Span::new(6, 9), multiplicity: 1 },
            ]
        );
    }

    #[test]
    fn empty_inputs() {
        assert!(reduce_superclips(&[]).is_empty());
        assert_eq!(excise_nonclips(10, &[]), vec![Span::new(0, 10)]);
        assert_eq!(h_coverage(10, &[]).unwrap(), 0.0);
        assert!(excise_nonclips(0, &[]).is_empty());
    }

    #[test]
    fn full_tiling_has_no_gaps() {
        let sc = reduce_superclips(&spans(&[(0, 4), (4, 10)]));
        assert!(excise_nonclips(10, &sc).is_empty());
        assert_eq!(h_coverage(10, &sc).unwrap(), 1.0);
    }

    #[test]
    fn coverage_ratio() {
        let sc = reduce_superclips(&spans(&[(10, 35)]));
        assert_eq!(h_coverage(100, &sc).unwrap(), 0.25);
        assert!(h_coverage(0, &sc).is_err());
    }

    #[test]
    fn random_spans_match_fixpoint_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::substream(11, "interval-test", 0);
        let clips: Vec<Span> = (0..500)
            .map(|_| {
                let s = rng.gen_range(0..5000);
                Span::new(s, s + rng.gen_range(1..40))
            })
            .collect();
        let fast: Vec<(Span, usize)> =
            reduce_superclips(&clips).into_iter().map(|sc| (sc.span, sc.multiplicity)).collect();
        assert_eq!(fast, fixpoint_merge(&clips));
    }

    fn arb_spans() -> impl Strategy<Value = Vec<Span>> {
        prop::collection::vec((0usize..200, 1usize..30), 0..40)
            .prop_map(|v| v.into_iter().map(|(s, l)| Span::new(s, s + l)).collect())
    }

    proptest! {
        #[test]
        fn reduction_invariants(clips in arb_spans()) {
            let out = reduce_superclips(&clips);
            prop_assert_eq!(out.iter().map(|s| s.multiplicity).sum::<usize>(), clips.len());
            for w in out.windows(2) {
                prop_assert!(w[0].span.end <= w[1].span.start);
            }
            for c in &clips {
                prop_assert_eq!(out.iter().filter(|s| s.span.contains(c)).count(), 1);
            }
            let spans: Vec<Span> = out.iter().map(|s| s.span).collect();
            let again: Vec<Span> = reduce_superclips(&spans).iter().map(|s| s.span).collect();
            prop_assert_eq!(again, spans);
        }

        #[test]
        fn excision_complements_superclips(clips in arb_spans()) {
            let doc_length = 260;
            let out = reduce_superclips(&clips);
            let gaps = excise_nonclips(doc_length, &out);
            let mut mask = vec![0u8; doc_length];
            for s in out.iter().map(|s| s.span).chain(gaps.iter().copied()) {
                for m in &mut mask[s.start..s.end] {
                    *m += 1;
                }
            }
            prop_assert!(mask.iter().all(|&m| m == 1));
            let as_clips: Vec<SuperClip> = gaps.iter().map(|&span| SuperClip { span, multiplicity: 1 }).collect();
            let total = h_coverage(doc_length, &out).unwrap() + h_coverage(doc_length, &as_clips).unwrap();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
