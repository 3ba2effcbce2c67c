use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::TokenSequence;
use crate::error::{Error, Result};

/// Ranked n-gram vocabulary with document frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "VocabularyRepr", into = "VocabularyRepr")]
pub struct Vocabulary {
    terms: Vec<String>,
    document_frequency: Vec<u64>,
    index: HashMap<String, usize>,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub corpus_doc_count: u64,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    document_frequency: Vec<u64>,
    ngram_min: usize,
    ngram_max: usize,
    corpus_doc_count: u64,
}

impl From<VocabularyRepr> for Vocabulary {
    fn from(r: VocabularyRepr) -> Self {
        Vocabulary::from_parts(r.terms, r.document_frequency, r.ngram_min, r.ngram_max, r.corpus_doc_count)
    }
}

impl From<Vocabulary> for VocabularyRepr {
    fn from(v: Vocabulary) -> Self {
        VocabularyRepr {
            terms: v.terms,
            document_frequency: v.document_frequency,
            ngram_min: v.ngram_min,
            ngram_max: v.ngram_max,
            corpus_doc_count: v.corpus_doc_count,
        }
    }
}

impl Vocabulary {
    /// Assemble from terms in index order.
    pub fn from_parts(
        terms: Vec<String>,
        document_frequency: Vec<u64>,
        ngram_min: usize,
        ngram_max: usize,
        corpus_doc_count: u64,
    ) -> Self {
        let index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { terms, document_frequency, index, ngram_min, ngram_max, corpus_doc_count }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn document_frequency(&self, index: usize) -> u64 {
        self.document_frequency[index]
    }

    /// Smoothed inverse document frequency `ln((1 + D) / (1 + df)) + 1`.
    pub fn idf(&self, index: usize) -> f64 {
        idf(self.corpus_doc_count, self.document_frequency[index])
    }

    /// Largest idf over the vocabulary, or 1 when empty.
    pub fn max_idf(&self) -> f64 {
        self.document_frequency.iter().map(|&df| idf(self.corpus_doc_count, df)).fold(1.0, f64::max)
    }
}

fn idf(docs: u64, df: u64) -> f64 {
    ((1.0 + docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

/// Space-joined n-grams of every order in `[min, max]`, in order of appearance.
fn ngrams(tokens: &[String], min: usize, max: usize) -> impl Iterator<Item = String> + '_ {
    (min..=max).flat_map(move |n| tokens.windows(n).map(|w| w.join(" ")))
}

/// The `max_terms` most frequent n-grams, ties broken lexicographically.
pub fn build_vocabulary(
    corpus: &[TokenSequence],
    max_terms: usize,
    ngram_min: usize,
    ngram_max: usize,
) -> Result<Vocabulary> {
    if corpus.is_empty() {
        return Err(Error::Empty("vocabulary needs at least one document"));
    }
    if ngram_min == 0 || ngram_min > ngram_max {
        return Err(Error::InvalidInput(format!("bad n-gram range ({ngram_min}, {ngram_max})")));
    }
    let mut freq: HashMap<String, (u64, u64)> = HashMap::new();
    for doc in corpus {
        let mut seen = HashSet::new();
        for g in ngrams(&doc.tokens, ngram_min, ngram_max) {
            let entry = freq.entry(g.clone()).or_default();
            entry.0 += 1;
            if seen.insert(g) {
                entry.1 += 1;
            }
        }
    }
    let mut ranked: Vec<(String, (u64, u64))> = freq.into_iter().collect();
    ranked.sort_by(|a, b| b.1 .0.cmp(&a.1 .0).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(max_terms);
    let (terms, dfs) = ranked.into_iter().map(|(t, (_, df))| (t, df)).unzip();
    Ok(Vocabulary::from_parts(terms, dfs, ngram_min, ngram_max, corpus.len() as u64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightScheme {
    Count,
    Tfidf,
}

/// Sparse feature vector, entries sorted by index with no stored zeros.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    pub entries: Vec<(u32, f64)>,
}

impl SparseVector {
    pub fn from_dense(values: &[f64]) -> Self {
        SparseVector {
            entries: values.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i as u32, v)).collect(),
        }
    }

    pub fn get(&self, index: u32) -> f64 {
        self.entries.binary_search_by_key(&index, |e| e.0).map_or(0.0, |p| self.entries[p].1)
    }
}

/// Project a token sequence onto the vocabulary; out-of-vocabulary n-grams are dropped.
///
/// `Count` gives raw n-gram counts. `Tfidf` weights `count / token_count` by the term's idf.
pub fn vectorize(tokens: &TokenSequence, vocab: &Vocabulary, scheme: WeightScheme) -> SparseVector {
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for g in ngrams(&tokens.tokens, vocab.ngram_min, vocab.ngram_max) {
        if let Some(i) = vocab.index_of(&g) {
            *counts.entry(i).or_default() += 1;
        }
    }
    let n = tokens.len() as f64;
    SparseVector {
        entries: counts
            .into_iter()
            .map(|(i, c)| {
                let w = match scheme {
                    WeightScheme::Count => c as f64,
                    WeightScheme::Tfidf => c as f64 / n * vocab.idf(i),
                };
                (i as u32, w)
            })
            .collect(),
    }
}
